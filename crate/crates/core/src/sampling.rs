//! Base samplers for CMA-ES offspring: i.i.d. Gaussian, and randomized
//! Halton / Sobol low-discrepancy points mapped through Φ⁻¹.
//!
//! Halton uses the first `d` primes with a per-run Cranley-Patterson shift.
//! Sobol uses Joe-Kuo direction numbers (up to 30 dimensions), skips the
//! all-zero point at index 0 so the first raw point is `(0.5, …, 0.5)`, and
//! applies a per-run random digital (XOR) shift.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Inverse standard-normal CDF (Wichura's AS241, PPND16; relative error
/// around 1e-16).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_6,
        1.331_416_678_917_843_8e2,
        1.971_590_950_306_551_3e3,
        1.373_169_376_550_946e4,
        4.592_195_393_154_987e4,
        6.726_577_092_700_87e4,
        3.343_057_558_358_813e4,
        2.509_080_928_730_122_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091e1,
        6.871_870_074_920_579e2,
        5.394_196_021_424_751e3,
        2.121_379_430_158_659_7e4,
        3.930_789_580_009_271e4,
        2.872_908_573_572_194_3e4,
        5.226_495_278_852_545e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_5,
        4.630_337_846_156_545,
        5.769_497_221_460_691,
        3.647_848_324_763_204_5,
        1.270_458_252_452_368_4,
        2.417_807_251_774_506e-1,
        2.272_384_498_926_918_4e-2,
        7.745_450_142_783_414e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_759,
        1.676_384_830_183_803_8,
        6.897_673_349_851e-1,
        1.481_039_764_274_800_8e-1,
        1.519_866_656_361_645_7e-2,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_8e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103,
        5.463_784_911_164_114,
        1.784_826_539_917_291_3,
        2.965_605_718_285_049e-1,
        2.653_218_952_657_612_4e-2,
        1.242_660_947_388_078_4e-3,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288_1e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879e-1,
        1.369_298_809_227_358e-1,
        1.487_536_129_085_061_5e-2,
        7.868_691_311_456_133e-4,
        1.846_318_317_510_054_8e-5,
        1.421_511_758_316_446e-7,
        2.044_263_103_389_939_7e-15,
    ];
    fn poly(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
    }

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let v = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -v
    } else {
        v
    }
}

/// Keeps low-discrepancy coordinates away from 0 and 1 before Φ⁻¹.
fn to_normal(u: f64) -> f64 {
    const EPS: f64 = 1.0 / (1u64 << 33) as f64;
    inverse_normal_cdf(u.clamp(EPS, 1.0 - EPS))
}

fn first_primes(n: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(n);
    let mut c = 2u64;
    while primes.len() < n {
        if primes.iter().take_while(|&&p| p * p <= c).all(|&p| !c.is_multiple_of(p)) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += (index % base) as f64 * f;
        index /= base;
        f *= inv;
    }
    r
}

#[derive(Clone, Debug)]
pub struct Halton {
    bases: Vec<u64>,
    shift: Vec<f64>,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize, rng: &mut Rng) -> Self {
        Halton { bases: first_primes(dim), shift: (0..dim).map(|_| rng.random::<f64>()).collect(), index: 0 }
    }

    /// Unshifted point number `index` (starting at 1).
    pub fn raw_point(&self, index: u64) -> Vec<f64> {
        self.bases.iter().map(|&b| radical_inverse(index, b)).collect()
    }

    pub fn next_uniform(&mut self) -> Vec<f64> {
        self.index += 1;
        let p = self.raw_point(self.index);
        p.iter().zip(&self.shift).map(|(u, s)| (u + s).fract()).collect()
    }
}

/// `(degree s, coefficient bits a, initial direction numbers m)` for
/// dimensions 2..=30; dimension 1 is the van der Corput sequence.
pub(crate) const JOE_KUO: [(u32, u32, &[u32]); 29] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
    (7, 7, &[1, 1, 3, 13, 7, 35, 63]),
    (7, 8, &[1, 3, 5, 9, 1, 25, 53]),
    (7, 14, &[1, 3, 1, 13, 9, 35, 107]),
    (7, 19, &[1, 3, 1, 5, 27, 61, 31]),
    (7, 21, &[1, 1, 5, 11, 19, 41, 61]),
    (7, 28, &[1, 3, 5, 3, 3, 13, 69]),
    (7, 31, &[1, 1, 7, 13, 1, 19, 1]),
    (7, 32, &[1, 3, 7, 5, 13, 19, 59]),
    (7, 37, &[1, 1, 3, 9, 25, 29, 41]),
];

pub const SOBOL_MAX_DIM: usize = JOE_KUO.len() + 1;
const SOBOL_BITS: usize = 32;

#[derive(Clone, Debug)]
pub struct Sobol {
    /// `directions[j][k]` is v_{k+1} for dimension j, scaled by 2^32.
    directions: Vec<[u32; SOBOL_BITS]>,
    state: Vec<u32>,
    shift: Vec<u32>,
    index: u64,
}

impl Sobol {
    pub fn new(dim: usize, rng: &mut Rng) -> Result<Self> {
        if dim > SOBOL_MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "Sobol sampler supports at most {SOBOL_MAX_DIM} dimensions, got {dim}"
            )));
        }
        let mut directions = Vec::with_capacity(dim);
        for j in 0..dim {
            let mut v = [0u32; SOBOL_BITS];
            if j == 0 {
                for (k, vk) in v.iter_mut().enumerate() {
                    *vk = 1 << (31 - k);
                }
            } else {
                let (s, a, m) = JOE_KUO[j - 1];
                let s = s as usize;
                for k in 0..s.min(SOBOL_BITS) {
                    v[k] = m[k] << (31 - k);
                }
                for k in s..SOBOL_BITS {
                    let mut x = v[k - s] ^ (v[k - s] >> s);
                    for t in 1..s {
                        if (a >> (s - 1 - t)) & 1 == 1 {
                            x ^= v[k - t];
                        }
                    }
                    v[k] = x;
                }
            }
            directions.push(v);
        }
        let shift = (0..dim).map(|_| rng.random::<u32>()).collect();
        Ok(Sobol { directions, state: vec![0; dim], shift, index: 0 })
    }

    /// Advances the unshifted Gray-code sequence and returns its integer state.
    fn advance(&mut self) -> &[u32] {
        let c = self.index.trailing_ones() as usize;
        for (s, v) in self.state.iter_mut().zip(&self.directions) {
            *s ^= v[c.min(SOBOL_BITS - 1)];
        }
        self.index += 1;
        &self.state
    }

    /// Next unshifted point; the first call returns `(0.5, …, 0.5)`.
    pub fn next_raw(&mut self) -> Vec<f64> {
        self.advance().iter().map(|&s| s as f64 / 4_294_967_296.0).collect()
    }

    pub fn next_uniform(&mut self) -> Vec<f64> {
        let shift = self.shift.clone();
        self.advance().iter().zip(shift).map(|(&s, h)| ((s ^ h) as f64 + 0.5) / 4_294_967_296.0).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerKind {
    Gaussian,
    Halton,
    Sobol,
}

impl SamplerKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Some(SamplerKind::Gaussian),
            "halton" => Some(SamplerKind::Halton),
            "sobol" => Some(SamplerKind::Sobol),
            _ => None,
        }
    }
}

/// Source of standard-normal vectors `z`.
#[derive(Clone, Debug)]
pub enum Sampler {
    Gaussian { dim: usize },
    Halton(Halton),
    Sobol(Sobol),
}

impl Sampler {
    pub fn new(kind: SamplerKind, dim: usize, rng: &mut Rng) -> Result<Self> {
        Ok(match kind {
            SamplerKind::Gaussian => Sampler::Gaussian { dim },
            SamplerKind::Halton => Sampler::Halton(Halton::new(dim, rng)),
            SamplerKind::Sobol => Sampler::Sobol(Sobol::new(dim, rng)?),
        })
    }

    pub fn next_z(&mut self, rng: &mut Rng) -> Vec<f64> {
        match self {
            Sampler::Gaussian { dim } => (0..*dim).map(|_| rng.sample(StandardNormal)).collect(),
            Sampler::Halton(h) => h.next_uniform().into_iter().map(to_normal).collect(),
            Sampler::Sobol(s) => s.next_uniform().into_iter().map(to_normal).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use statrs::function::erf::erfc;

    fn phi(x: f64) -> f64 {
        0.5 * erfc(-x / std::f64::consts::SQRT_2)
    }

    #[test]
    fn inverse_cdf_round_trips_through_erfc() {
        assert_eq!(inverse_normal_cdf(0.5), 0.0);
        for i in 1..2000 {
            let p = i as f64 / 2000.0;
            let x = inverse_normal_cdf(p);
            assert!((phi(x) - p).abs() <= 1e-9 * p.min(1.0 - p), "p={p}");
        }
        for p in [1e-300, 1e-100, 1e-20, 1e-10, 1e-5] {
            let x = inverse_normal_cdf(p);
            assert!(((phi(x) - p) / p).abs() < 1e-9, "p={p}");
            assert!((inverse_normal_cdf(1.0 - p) + x).abs() < 1e-6 || p < 1e-16);
        }
        // Tabulated quantiles.
        assert!((inverse_normal_cdf(0.975) - 1.959963984540054).abs() < 1e-12);
        assert!((inverse_normal_cdf(0.9995) - 3.290526731491926).abs() < 1e-12);
    }

    fn is_primitive(s: u32, a: u32) -> bool {
        // poly = x^s + a_1 x^{s-1} + ... + a_{s-1} x + 1 over GF(2)
        let poly: u64 = (1 << s) | ((a as u64) << 1) | 1;
        let order = (1u64 << s) - 1;
        let mulx = |v: u64| {
            let v = v << 1;
            if v & (1 << s) != 0 {
                v ^ poly
            } else {
                v
            }
        };
        let mut v = 1u64;
        for k in 1..=order {
            v = mulx(v);
            if v == 1 {
                return k == order;
            }
        }
        false
    }

    #[test]
    fn direction_tables_are_well_formed() {
        let mut seen = std::collections::HashSet::new();
        for &(s, a, m) in JOE_KUO.iter() {
            assert_eq!(m.len(), s as usize);
            assert!(is_primitive(s, a), "s={s} a={a}");
            assert!(seen.insert((s, a)), "duplicate polynomial");
            for (i, &mi) in m.iter().enumerate() {
                assert_eq!(mi % 2, 1);
                assert!(mi < 1 << (i + 1));
            }
        }
    }

    #[test]
    fn sobol_raw_sequence_starts_at_centre() {
        let mut rng = rng_from_seed(1);
        let mut s = Sobol::new(30, &mut rng).unwrap();
        let first = s.next_raw();
        assert!(first.iter().all(|&u| u == 0.5));
        assert!(first.iter().all(|&u| inverse_normal_cdf(u) == 0.0));
        let second = s.next_raw();
        assert!(second.iter().all(|&u| u == 0.25 || u == 0.75));
        assert!(Sobol::new(31, &mut rng).is_err());
    }

    #[test]
    fn sobol_one_dimensional_projections_are_stratified() {
        // The first 2^k points of every dimension hit each dyadic interval
        // of length 2^-k exactly once (counting the skipped origin).
        let mut rng = rng_from_seed(2);
        let mut s = Sobol::new(30, &mut rng).unwrap();
        let k = 8;
        let n = 1usize << k;
        let mut hits = vec![vec![0u32; n]; 30];
        for row in &mut hits {
            row[0] += 1;
        }
        for _ in 1..n {
            for (j, u) in s.next_raw().into_iter().enumerate() {
                hits[j][(u * n as f64) as usize] += 1;
            }
        }
        assert!(hits.iter().all(|row| row.iter().all(|&h| h == 1)));
    }

    #[test]
    fn halton_matches_radical_inverse() {
        let mut rng = rng_from_seed(3);
        let h = Halton::new(3, &mut rng);
        assert_eq!(h.raw_point(1), vec![0.5, 1.0 / 3.0, 0.2]);
        assert_eq!(h.raw_point(6), vec![0.375, 2.0 / 9.0, 0.2 + 0.04]);
        assert_eq!(first_primes(5), vec![2, 3, 5, 7, 11]);
    }

    #[test]
    fn gaussian_sample_mean_is_centred() {
        let mut rng = rng_from_seed(4);
        let mut s = Sampler::new(SamplerKind::Gaussian, 5, &mut rng).unwrap();
        let n = 100_000;
        let mut sum = [0.0; 5];
        for _ in 0..n {
            for (a, z) in sum.iter_mut().zip(s.next_z(&mut rng)) {
                *a += z;
            }
        }
        assert!(sum.iter().all(|a| (a / n as f64).abs() <= 0.02));
    }

    #[test]
    fn quasi_random_samplers_look_standard_normal() {
        for kind in [SamplerKind::Halton, SamplerKind::Sobol] {
            let mut rng = rng_from_seed(5);
            let mut s = Sampler::new(kind, 5, &mut rng).unwrap();
            let n = 4096;
            let (mut m, mut v) = (0.0, 0.0);
            for _ in 0..n {
                let z = s.next_z(&mut rng);
                assert!(z.iter().all(|x| x.is_finite()));
                m += z[4];
                v += z[4] * z[4];
            }
            m /= n as f64;
            v = v / n as f64 - m * m;
            assert!(m.abs() < 0.02 && (v - 1.0).abs() < 0.05, "{kind:?}: {m} {v}");
        }
    }
}
