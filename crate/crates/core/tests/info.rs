use std::f64::consts::LN_2;

use gelfand::info::{
    binary_entropy, conditional_mutual_information, entropy, mutual_information, sample_memoryless_spectrum,
    spectral_rate_estimate, DensityTable, Histogram, SpectralMode, SpectrumSamples,
};
use gelfand::prob::Table;
use gelfand::rng::{domain, stream_rng};
use gelfand::Error;
use rand::Rng;
use proptest::prelude::*;

fn joint(dims: Vec<usize>) -> impl Strategy<Value = Table> {
    let size: usize = dims.iter().product();
    prop::collection::vec(0.0f64..1.0, size).prop_filter_map("positive mass", move |v| {
        let t: f64 = v.iter().sum();
        (t > 1e-3).then(|| Table::new(dims.clone(), v.into_iter().map(|x| x / t).collect()).unwrap())
    })
}

/// `sum p ln(p / (p_a p_b))` computed term by term.
fn mi_oracle(p: &[Vec<f64>]) -> f64 {
    let pa: Vec<f64> = p.iter().map(|r| r.iter().sum()).collect();
    let pb: Vec<f64> = (0..p[0].len()).map(|b| p.iter().map(|r| r[b]).sum()).collect();
    let mut total = 0.0;
    for (a, row) in p.iter().enumerate() {
        for (b, &v) in row.iter().enumerate() {
            if v > 0.0 {
                total += v * (v / (pa[a] * pb[b])).ln();
            }
        }
    }
    total
}

fn bsc_joint(p: f64) -> Table {
    Table::from_matrix(&[vec![0.5 * (1.0 - p), 0.5 * p], vec![0.5 * p, 0.5 * (1.0 - p)]]).unwrap()
}

#[test]
fn closed_forms() {
    assert!((entropy(&[0.25; 4]) - 4f64.ln()).abs() < 1e-15);
    assert_eq!(binary_entropy(0.0), 0.0);
    assert!((binary_entropy(0.5) - LN_2).abs() < 1e-15);
    for p in [0.0, 0.05, 0.1, 0.25, 0.5] {
        let mi = mutual_information(&bsc_joint(p)).unwrap();
        assert!((mi - (LN_2 - binary_entropy(p))).abs() < 1e-14, "p = {p}");
    }
    let f32_mi = mutual_information(&Table::<f32>::from_matrix(&[vec![0.45, 0.05], vec![0.05, 0.45]]).unwrap()).unwrap();
    assert!((f32_mi as f64 - (LN_2 - binary_entropy(0.1))).abs() < 1e-5);
}

#[test]
fn rank_is_checked() {
    assert!(matches!(
        mutual_information(&Table::new(vec![2, 1, 1], vec![0.5, 0.5]).unwrap()),
        Err(Error::Dimension(_))
    ));
    assert!(conditional_mutual_information(&bsc_joint(0.1)).is_err());
}

#[test]
fn density_table_marks_unreachable_pairs() {
    let t = Table::from_matrix(&[vec![0.5, 0.0, 0.0], vec![0.25, 0.25, 0.0]]).unwrap();
    let d = DensityTable::new(&t).unwrap();
    assert_eq!(d.get(0, 2), None);
    assert_eq!(d.get(0, 1), Some(f64::NEG_INFINITY));
    assert!((d.get(1, 1).unwrap() - 2f64.ln()).abs() < 1e-15);
}

#[test]
fn spectrum_concentrates_at_mutual_information() {
    let t = bsc_joint(0.1);
    let mi = mutual_information(&t).unwrap();
    let var = DensityTable::new(&t).unwrap().variance(&t);
    let (n, draws) = (500, 4000);
    let s = sample_memoryless_spectrum(&t, n, draws, 11).unwrap();
    assert_eq!(s, sample_memoryless_spectrum(&t, n, draws, 11).unwrap());
    let sd = (var / n as f64).sqrt();
    assert!((s.mean() - mi).abs() < 4.0 * sd / (draws as f64).sqrt());
    let inf = spectral_rate_estimate(&s, SpectralMode::Inf, 0.01).unwrap().value;
    let sup = spectral_rate_estimate(&s, SpectralMode::Sup, 0.01).unwrap().value;
    // Normal quantiles at 1% are about 2.33 sd from the centre.
    assert!((inf - (mi - 2.33 * sd)).abs() < 0.5 * sd, "{inf}");
    assert!((sup - (mi + 2.33 * sd)).abs() < 0.5 * sd, "{sup}");
}

#[test]
fn quantile_ranks_and_budgets() {
    let s = SpectrumSamples::new((1..=100).map(f64::from).collect(), 1, 0).unwrap();
    assert_eq!(spectral_rate_estimate(&s, SpectralMode::Inf, 0.01).unwrap().value, 1.0);
    assert_eq!(spectral_rate_estimate(&s, SpectralMode::Sup, 0.01).unwrap().value, 99.0);
    assert_eq!(spectral_rate_estimate(&s, SpectralMode::Inf, 0.05).unwrap().value, 5.0);
    let few = SpectrumSamples::new(vec![1.0; 50], 1, 0).unwrap();
    assert!(matches!(spectral_rate_estimate(&few, SpectralMode::Inf, 0.01), Err(Error::Budget(_))));
    assert!(spectral_rate_estimate(&s, SpectralMode::Inf, 0.0).is_err());
    assert!(matches!(SpectrumSamples::new(vec![], 1, 0), Err(Error::Budget(_))));
}

#[test]
fn histogram_finds_separated_modes() {
    let mut v: Vec<f64> = (0..500).map(|i| 0.15 + 0.01 * ((i % 7) as f64 - 3.0) / 3.0).collect();
    v.extend((0..500).map(|i| 0.55 + 0.01 * ((i % 5) as f64 - 2.0) / 2.0));
    let h = Histogram::new(&v, 0.005).unwrap();
    let modes = h.modes(5, 0.001, 1);
    assert_eq!(modes.len(), 2);
    assert!((modes[0].location - 0.15).abs() < 0.01 && (modes[1].location - 0.55).abs() < 0.01);
    assert_eq!(Histogram::mass_near(&v, &modes, 0.05), 1.0);
}

#[test]
fn conditional_mutual_information_special_cases() {
    // C independent of (A, B): equals I(A; B).
    let ab = [[0.4, 0.1], [0.2, 0.3]];
    let pc = [0.25, 0.75];
    let data: Vec<f64> = (0..8).map(|i| ab[i / 4][(i / 2) % 2] * pc[i % 2]).collect();
    let t = Table::new(vec![2, 2, 2], data).unwrap();
    let mi = mutual_information(&Table::from_matrix(&[ab[0].to_vec(), ab[1].to_vec()]).unwrap()).unwrap();
    assert!((conditional_mutual_information(&t).unwrap() - mi).abs() < 1e-14);
    // A = B = C uniform.
    let same: Table = Table::new(vec![2, 2, 2], vec![0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5]).unwrap();
    assert!(conditional_mutual_information(&same).unwrap().abs() < 1e-15);
}

#[test]
fn data_processing_on_random_chains() {
    let mut rng = stream_rng(12, domain::SAMPLE, 0, 0);
    let mut row = |k: usize| -> Vec<f64> {
        let v: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let t: f64 = v.iter().sum();
        v.into_iter().map(|x| x / t).collect()
    };
    for _ in 0..500 {
        let pa = row(3);
        let ab: Vec<Vec<f64>> = (0..3).map(|_| row(3)).collect();
        let bc: Vec<Vec<f64>> = (0..3).map(|_| row(2)).collect();
        let j_ab: Vec<Vec<f64>> = (0..3).map(|a| (0..3).map(|b| pa[a] * ab[a][b]).collect()).collect();
        let j_ac: Vec<Vec<f64>> = (0..3)
            .map(|a| (0..2).map(|c| (0..3).map(|b| pa[a] * ab[a][b] * bc[b][c]).sum()).collect())
            .collect();
        let i_ab = mutual_information(&Table::from_matrix(&j_ab).unwrap()).unwrap();
        let i_ac = mutual_information(&Table::from_matrix(&j_ac).unwrap()).unwrap();
        assert!(i_ab - i_ac >= -1e-12);
    }
}

#[test]
fn inf_estimate_never_exceeds_sup_estimate() {
    for seed in 0..20 {
        let s = sample_memoryless_spectrum(&bsc_joint(0.2), 50, 200, seed).unwrap();
        for delta in [0.01, 0.1, 0.5] {
            let inf = spectral_rate_estimate(&s, SpectralMode::Inf, delta).unwrap().value;
            let sup = spectral_rate_estimate(&s, SpectralMode::Sup, delta).unwrap().value;
            assert!(inf <= sup);
        }
    }
}

/// At n = 2000 the 1% quantile of the BSC(0.1) block density sits about
/// 2.33 sd / sqrt(n) = 0.034 nats below the mutual information, so a
/// 0.01-nat tolerance cannot hold for any faithful quantile estimator.
#[test]
#[ignore = "the 1% quantile is about 0.034 nats from the mean at n = 2000"]
fn one_percent_quantiles_within_a_hundredth_of_mutual_information() {
    let t = bsc_joint(0.1);
    let mi = mutual_information(&t).unwrap();
    let s = sample_memoryless_spectrum(&t, 2000, 10_000, 1).unwrap();
    for mode in [SpectralMode::Inf, SpectralMode::Sup] {
        let v = spectral_rate_estimate(&s, mode, 0.01).unwrap().value;
        assert!((v - mi).abs() <= 0.01, "{mode:?}: {v} vs {mi}");
    }
}

proptest! {
    #[test]
    fn mutual_information_matches_definition(t in joint(vec![3, 4])) {
        let rows: Vec<Vec<f64>> = t.data().chunks(4).map(|r| r.to_vec()).collect();
        let mi = mutual_information(&t).unwrap();
        prop_assert!((mi - mi_oracle(&rows)).abs() < 1e-12);
        prop_assert!(mi >= -1e-15);
        let ha = entropy(t.marginal(&[0]).data());
        let hb = entropy(t.marginal(&[1]).data());
        prop_assert!(mi <= ha.min(hb) + 1e-12);
        let d = DensityTable::new(&t).unwrap();
        prop_assert!((d.expectation(&t) - mi).abs() < 1e-12);
    }

    #[test]
    fn chain_rule(t in joint(vec![2, 3, 2])) {
        // I(A; B, C) = I(A; C) + I(A; B | C).
        let abc: Vec<f64> = t.data().to_vec();
        let a_bc = Table::new(vec![2, 6], abc).unwrap();
        let a_c = t.marginal(&[0, 2]);
        let lhs = mutual_information(&a_bc).unwrap();
        let rhs = mutual_information(&a_c).unwrap() + conditional_mutual_information(&t).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12);
        prop_assert!(conditional_mutual_information(&t).unwrap() >= -1e-14);
    }
}
