//! The random Gel'fand-Pinsker code: subcodebooks, covering encoder and
//! threshold decoder.
//!
//! Two representations are supported. An explicit codebook stores every
//! codeword and is limited to [`MAX_CODEWORDS`]. A lazy codebook draws the
//! codewords of the transmitted subcodebook on demand and accounts for all
//! others exactly through the probability that an independent codeword is
//! jointly typical with the received block; every trial then sees a fresh
//! code realization, i.e. the simulation averages over the random-code
//! ensemble.

use std::borrow::Cow;

use rand::Rng;
use serde::Serialize;

use super::pi::{eta, in_t1, LetterDensity};
use super::CodingSystem;
use crate::error::{Error, Result};
use crate::prob::Categorical;
use crate::rng::{domain, stream_rng};

/// Largest explicit codebook, in codewords.
pub const MAX_CODEWORDS: f64 = (1u64 << 22) as f64;
/// Largest accepted work estimate, in elementary letter operations.
pub const MAX_WORK: f64 = (1u64 << 30) as f64;
/// Largest number of joint types enumerated for one typicality tail.
pub const MAX_TAIL_ATOMS: f64 = (1u64 << 22) as f64;

/// Relative slack so that `exp(ln k)` rounds up to `k`, not `k + 1`.
const CEIL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CodeMode {
    /// Explicit when the guards allow it, lazy otherwise.
    Auto,
    Explicit,
    Lazy,
}

/// Message rate `R` and total codeword rate `R~`, in nats per letter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CodeRates {
    pub rate: f64,
    pub rate_tilde: f64,
}

impl CodeRates {
    pub fn new(rate: f64, rate_tilde: f64) -> Result<Self> {
        if !(rate.is_finite() && rate_tilde.is_finite()) || rate < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "rates must be finite and non-negative (R = {rate}, R~ = {rate_tilde})"
            )));
        }
        if rate > rate_tilde {
            return Err(Error::InvalidArgument(format!("R = {rate} exceeds R~ = {rate_tilde}")));
        }
        Ok(CodeRates { rate, rate_tilde })
    }
}

/// `ceil(exp(x))` as an exact count when it fits, with its logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Count {
    /// `None` when the count exceeds `2^63`.
    pub exact: Option<u64>,
    pub ln: f64,
}

impl Count {
    fn ceil_exp(x: f64) -> Count {
        let v = x.exp();
        if v < (1u64 << 63) as f64 {
            let k = ((v * (1.0 - CEIL_SLACK)).ceil() as u64).max(1);
            Count {
                exact: Some(k),
                ln: (k as f64).ln(),
            }
        } else {
            Count { exact: None, ln: x }
        }
    }

    fn exact(k: u64) -> Count {
        Count {
            exact: Some(k),
            ln: (k as f64).ln(),
        }
    }

    /// Value as a float (may be infinite).
    pub fn approx(&self) -> f64 {
        self.exact.map_or(self.ln.exp(), |k| k as f64)
    }
}

/// Sizes of a code: `M` messages, `L` codewords per subcodebook.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CodeSizes {
    pub n: usize,
    pub messages: Count,
    pub subcode: Count,
}

impl CodeSizes {
    pub fn new(n: usize, rates: CodeRates) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("blocklength must be positive".into()));
        }
        let nf = n as f64;
        Ok(CodeSizes {
            n,
            messages: Count::ceil_exp(nf * rates.rate),
            subcode: Count::ceil_exp(nf * (rates.rate_tilde - rates.rate)),
        })
    }

    /// `ln(M L)`.
    pub fn ln_total(&self) -> f64 {
        self.messages.ln + self.subcode.ln
    }

    fn explicit_total(&self) -> Option<u64> {
        let t = self.messages.exact?.checked_mul(self.subcode.exact?)?;
        (t as f64 <= MAX_CODEWORDS).then_some(t)
    }
}

#[derive(Debug, Clone)]
enum Words {
    /// `M L` codewords of `n` letters, message-major.
    Explicit(Vec<u8>),
    Lazy { seed: u64, letters: Categorical },
}

/// A random code; see the module documentation for the two representations.
#[derive(Debug, Clone)]
pub struct Codebook {
    sizes: CodeSizes,
    n_u: usize,
    words: Words,
}

impl Codebook {
    /// Draws a code with i.i.d. codewords from `P_U`.
    pub fn build(n: usize, rates: CodeRates, p_u: &[f64], mode: CodeMode, seed: u64) -> Result<Self> {
        let sizes = CodeSizes::new(n, rates)?;
        if p_u.len() > u8::MAX as usize + 1 {
            return Err(Error::InvalidArgument("auxiliary alphabets above 256 symbols are not supported".into()));
        }
        let letters = Categorical::new(p_u);
        let explicit = match mode {
            CodeMode::Lazy => false,
            CodeMode::Explicit => true,
            CodeMode::Auto => sizes
                .explicit_total()
                .is_some_and(|t| t as f64 * n as f64 <= MAX_WORK),
        };
        if !explicit {
            return Ok(Codebook {
                sizes,
                n_u: p_u.len(),
                words: Words::Lazy { seed, letters },
            });
        }
        let total = sizes.explicit_total().ok_or_else(|| Error::TooLarge {
            work: sizes.ln_total().exp(),
            bound: MAX_CODEWORDS,
            hint: "explicit codebook too large; reduce n or rates".into(),
        })?;
        let work = total as f64 * n as f64;
        if work > MAX_WORK {
            return Err(Error::TooLarge {
                work,
                bound: MAX_WORK,
                hint: "explicit codebook too large; reduce n or rates".into(),
            });
        }
        let mut rng = stream_rng(seed, domain::CODEBOOK, 0, 1);
        let data = (0..total as usize * n).map(|_| letters.sample(&mut rng) as u8).collect();
        Ok(Codebook {
            sizes,
            n_u: p_u.len(),
            words: Words::Explicit(data),
        })
    }

    /// An explicit code from given codewords, `subcode` per message in order.
    pub fn from_words(words: &[Vec<usize>], subcode: usize, n_u: usize) -> Result<Self> {
        if words.is_empty() || subcode == 0 || words.len() % subcode != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} codewords do not split into subcodebooks of {subcode}",
                words.len()
            )));
        }
        let n = words[0].len();
        if n == 0 || words.iter().any(|w| w.len() != n || w.iter().any(|&u| u >= n_u)) || n_u > 256 {
            return Err(Error::Dimension("codewords must share a positive length and alphabet".into()));
        }
        Ok(Codebook {
            sizes: CodeSizes {
                n,
                messages: Count::exact((words.len() / subcode) as u64),
                subcode: Count::exact(subcode as u64),
            },
            n_u,
            words: Words::Explicit(words.iter().flatten().map(|&u| u as u8).collect()),
        })
    }

    pub fn sizes(&self) -> CodeSizes {
        self.sizes
    }

    pub fn is_explicit(&self) -> bool {
        matches!(self.words, Words::Explicit(_))
    }

    /// Codeword `j` of subcodebook `m`. Lazy codes draw it from the stream of
    /// the given `realization` (the trial index).
    pub fn word(&self, realization: u64, m: u64, j: u64) -> Cow<'_, [u8]> {
        let n = self.sizes.n;
        match &self.words {
            Words::Explicit(data) => {
                let l = (m * self.sizes.subcode.exact.expect("explicit") + j) as usize;
                Cow::Borrowed(&data[l * n..(l + 1) * n])
            }
            Words::Lazy { seed, letters } => {
                let mut rng = stream_rng(*seed, domain::CODEBOOK, realization, j);
                Cow::Owned((0..n).map(|_| letters.sample(&mut rng) as u8).collect())
            }
        }
    }

    /// Byte image of an explicit codebook (empty for lazy codes).
    pub fn to_bytes(&self) -> Vec<u8> {
        match &self.words {
            Words::Explicit(d) => d.clone(),
            Words::Lazy { .. } => Vec::new(),
        }
    }

    fn joint_counts(&self, word: &[u8], other: &[usize], n_other: usize) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_u * n_other];
        for (&u, &b) in word.iter().zip(other) {
            counts[u as usize * n_other + b] += 1;
        }
        counts
    }
}

/// Settings of the covering encoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EncoderSettings {
    /// `T1` threshold used inside `eta`.
    pub t1: f64,
    /// A codeword is accepted when its estimated `eta` is at most this
    /// (`pi1^(1/2)`).
    pub eta_limit: f64,
    pub inner_draws: usize,
    /// Lazy codes scan at most this many codewords of a subcodebook.
    pub scan_limit: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Encoded {
    /// Chosen index within the subcodebook (0 on covering failure).
    pub index: u64,
    pub x_block: Vec<usize>,
    pub covering_failed: bool,
    /// Codewords examined, in index order.
    pub scanned: u64,
    /// Largest standard error among the `eta` estimates made.
    pub eta_std_error: f64,
}

/// Scans `C(m)` in index order for the first codeword whose estimated `eta`
/// is within the limit; on failure falls back to index 0 and flags it.
/// Draws `X^n` letter by letter from `P_{X|U,S}` for the chosen codeword.
pub fn encode<R: Rng + ?Sized>(
    code: &Codebook,
    system: &CodingSystem,
    m: u64,
    s_block: &[usize],
    settings: &EncoderSettings,
    realization: u64,
    rng: &mut R,
) -> Result<Encoded> {
    let sizes = code.sizes;
    if s_block.len() != sizes.n {
        return Err(Error::Dimension(format!("state block has {} letters, code has n = {}", s_block.len(), sizes.n)));
    }
    if let Some(mm) = sizes.messages.exact {
        if m >= mm {
            return Err(Error::InvalidArgument(format!("message {m} out of range (M = {mm})")));
        }
    }
    let limit = match sizes.subcode.exact {
        Some(l) if code.is_explicit() || l <= settings.scan_limit => l,
        _ => settings.scan_limit,
    };
    let mut chosen = None;
    let mut eta_se: f64 = 0.0;
    let mut u = vec![0usize; sizes.n];
    for j in 0..limit {
        let word = code.word(realization, m, j);
        for (d, &w) in u.iter_mut().zip(word.iter()) {
            *d = w as usize;
        }
        let mut eta_rng = stream_rng(settings.seed, domain::ETA, realization, j);
        let e = eta(&u, s_block, system, settings.t1, settings.inner_draws, &mut eta_rng)?;
        eta_se = eta_se.max(e.std_error);
        if e.value <= settings.eta_limit {
            chosen = Some(j);
            break;
        }
    }
    let exhausted = sizes.subcode.exact != Some(limit);
    if chosen.is_none() && exhausted {
        return Err(Error::Budget(format!(
            "no covering codeword among the first {limit} of a subcodebook of size about {:.3e}; \
             raise the scan limit or lower the rates",
            sizes.subcode.approx()
        )));
    }
    let index = chosen.unwrap_or(0);
    let word = code.word(realization, m, index);
    let x_block = word
        .iter()
        .zip(s_block)
        .map(|(&u, &s)| system.sampler.input(u as usize, s, rng))
        .collect();
    Ok(Encoded {
        index,
        x_block,
        covering_failed: chosen.is_none(),
        scanned: chosen.map_or(limit, |j| j + 1),
        eta_std_error: eta_se,
    })
}

/// Decoder output for an explicit code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Decoded {
    /// The unique message with a codeword in `T1`, if any.
    pub message: Option<u64>,
    /// Every `(message, index)` whose codeword is jointly typical with `y^n`.
    pub typical: Vec<(u64, u64)>,
}

/// Scans every codeword of an explicit code for `T1` membership with `y^n`.
pub fn decode(code: &Codebook, system: &CodingSystem, y_block: &[usize], t1: f64) -> Result<Decoded> {
    let sizes = code.sizes;
    let (Some(mm), Some(l)) = (sizes.messages.exact, sizes.subcode.exact) else {
        return Err(Error::Precondition("decode needs an explicit codebook".into()));
    };
    if !code.is_explicit() {
        return Err(Error::Precondition("decode needs an explicit codebook".into()));
    }
    if y_block.len() != sizes.n || y_block.iter().any(|&y| y >= system.n_y()) {
        return Err(Error::Dimension("output block does not match the code".into()));
    }
    let mut typical = Vec::new();
    for m in 0..mm {
        for j in 0..l {
            let counts = code.joint_counts(&code.word(0, m, j), y_block, system.n_y());
            if in_t1(system, &counts, sizes.n, t1) {
                typical.push((m, j));
            }
        }
    }
    let first = typical.first().map(|t| t.0);
    let message = first.filter(|&m| typical.iter().all(|t| t.0 == m));
    Ok(Decoded { message, typical })
}

/// `ln` of the probability that a codeword drawn i.i.d. from `P_U`,
/// independently of `y^n`, is in `T1` with it. Only the output type
/// `y_counts` matters; the probability is summed exactly over joint types.
pub(crate) fn ln_typical_tail(
    density: &LetterDensity,
    p_u: &[f64],
    y_counts: &[usize],
    threshold: f64,
) -> Result<f64> {
    let n_y = y_counts.len();
    let n: usize = y_counts.iter().sum();
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=n).scan(0.0, |acc, k| {
            *acc += (k as f64).ln();
            Some(*acc)
        }))
        .collect();
    // Atoms (value, ln prob) of each output symbol's contribution.
    let mut groups: Vec<Vec<(f64, f64)>> = Vec::with_capacity(n_y);
    for (y, &ny) in y_counts.iter().enumerate() {
        let usable: Vec<(f64, f64)> = (0..p_u.len())
            .filter(|&u| p_u[u] > 0.0 && density.values[u * n_y + y].is_finite())
            .map(|u| (density.values[u * n_y + y], p_u[u].ln()))
            .collect();
        if ny == 0 {
            groups.push(vec![(0.0, 0.0)]);
            continue;
        }
        if usable.is_empty() {
            return Ok(f64::NEG_INFINITY);
        }
        let size = compositions(ny, usable.len());
        if size > MAX_TAIL_ATOMS {
            return Err(tail_too_large(size));
        }
        let mut atoms = Vec::with_capacity(size as usize);
        let mut c = vec![0usize; usable.len()];
        enumerate_compositions(ny, 0, &mut c, &mut |c| {
            let mut v = 0.0;
            let mut lp = ln_fact[ny];
            for (&k, &(f, lpu)) in c.iter().zip(&usable) {
                if k > 0 {
                    v += k as f64 * f;
                    lp += k as f64 * lpu - ln_fact[k];
                }
            }
            atoms.push((v, lp));
        });
        groups.push(atoms);
    }
    let last = (0..n_y).max_by_key(|&y| groups[y].len()).expect("non-empty output alphabet");
    let mut tail = groups.swap_remove(last);
    tail.sort_by(|a, b| b.0.total_cmp(&a.0));
    // prefix[i] = ln P(contribution >= tail[i].0).
    let mut prefix = Vec::with_capacity(tail.len());
    let mut acc = f64::NEG_INFINITY;
    for &(_, lp) in &tail {
        acc = ln_add(acc, lp);
        prefix.push(acc);
    }
    let mut partial = vec![(0.0, 0.0)];
    for g in &groups {
        if (partial.len() * g.len()) as f64 > MAX_TAIL_ATOMS {
            return Err(tail_too_large((partial.len() * g.len()) as f64));
        }
        partial = partial
            .iter()
            .flat_map(|&(v, lp)| g.iter().map(move |&(w, lq)| (v + w, lp + lq)))
            .collect();
    }
    let mut total = f64::NEG_INFINITY;
    for (v, lp) in partial {
        let need = threshold - v;
        let k = tail.partition_point(|a| a.0 >= need);
        if k > 0 {
            total = ln_add(total, lp + prefix[k - 1]);
        }
    }
    Ok(total.min(0.0))
}

fn tail_too_large(size: f64) -> Error {
    Error::TooLarge {
        work: size,
        bound: MAX_TAIL_ATOMS,
        hint: "too many joint types for the lazy decoder; reduce n or use smaller alphabets".into(),
    }
}

/// Number of compositions of `n` into `k` non-negative parts.
pub(crate) fn compositions(n: usize, k: usize) -> f64 {
    (1..k).fold(1.0, |acc, i| acc * (n + i) as f64 / i as f64)
}

fn enumerate_compositions(left: usize, i: usize, c: &mut [usize], visit: &mut impl FnMut(&[usize])) {
    if i + 1 == c.len() {
        c[i] = left;
        visit(c);
        return;
    }
    for k in 0..=left {
        c[i] = k;
        enumerate_compositions(left - k, i + 1, c, visit);
    }
}

fn ln_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// `ln P(Bin(N, p) = 0)` for `N = exp(ln_n)`, computed without forming `N`.
pub(crate) fn ln_none(ln_n: f64, ln_p: f64) -> f64 {
    if ln_n == f64::NEG_INFINITY || ln_p == f64::NEG_INFINITY {
        return 0.0;
    }
    let p = ln_p.exp();
    // -ln(1 - p), accurate for tiny p.
    let ln_a = if p >= 1.0 {
        return f64::NEG_INFINITY;
    } else if p > 1e-300 {
        (-(-p).ln_1p()).ln()
    } else {
        ln_p
    };
    -(ln_n + ln_a).exp()
}
