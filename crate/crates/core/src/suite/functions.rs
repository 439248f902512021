//! Raw cores of the 24 noiseless functions. `Problem::raw` returns the value
//! before the `fopt` offset; `Problem::evaluate` normalizes it.

use super::transforms::{fpen, lambda_diag, matvec, ratio, tasy, tosz, tosz1};
use super::Problem;
use crate::num::Real;

pub(crate) const LUNACEK_MU0: f64 = 2.5;
const SCHWEFEL_OFFSET: f64 = 4.189828872724339;

pub fn sphere_core<T: Real>(z: &[T]) -> T {
    z.iter().map(|&v| v * v).sum()
}

/// Σ 10^(6 (i-1)/(d-1)) z_i².
pub fn ellipsoid_core<T: Real>(z: &[T]) -> T {
    let d = z.len();
    z.iter().enumerate().map(|(i, &v)| T::lit(10f64.powf(6.0 * ratio(i, d))) * v * v).sum()
}

pub fn rastrigin_core<T: Real>(z: &[T]) -> T {
    let two_pi = T::lit(std::f64::consts::TAU);
    let s: T = z.iter().map(|&v| (two_pi * v).cos()).sum();
    T::lit(10.0) * (T::lit(z.len() as f64) - s) + sphere_core(z)
}

pub fn rosenbrock_core<T: Real>(z: &[T]) -> T {
    z.windows(2)
        .map(|w| {
            let a = w[0] * w[0] - w[1];
            let b = w[0] - T::one();
            T::lit(100.0) * a * a + b * b
        })
        .sum()
}

fn scale_lambda<T: Real>(alpha: f64, v: &mut [T]) {
    let diag = lambda_diag(alpha, v.len());
    for (x, l) in v.iter_mut().zip(diag) {
        *x = *x * T::lit(l);
    }
}

fn schaffer_core<T: Real>(z: &[T]) -> T {
    let d = z.len();
    let s: T = z
        .windows(2)
        .map(|w| {
            let si = (w[0] * w[0] + w[1] * w[1]).sqrt();
            let sin = (T::lit(50.0) * si.powf(T::lit(0.2))).sin();
            si.sqrt() + si.sqrt() * sin * sin
        })
        .sum();
    let m = s / T::lit((d - 1) as f64);
    m * m
}

impl<T: Real> Problem<T> {
    fn shifted(&self, x: &[T]) -> Vec<T> {
        x.iter().zip(&self.transform.xopt).map(|(&a, &b)| a - b).collect()
    }

    fn rot_r(&self, v: &[T]) -> Vec<T> {
        matvec(&self.transform.r, v)
    }

    fn rot_q(&self, v: &[T]) -> Vec<T> {
        matvec(&self.transform.q, v)
    }

    fn rosen_c(&self) -> T {
        T::lit(((self.dim() as f64).sqrt() / 8.0).max(1.0))
    }

    /// Function value without the `fopt` offset.
    pub(crate) fn raw(&self, x: &[T]) -> T {
        let d = self.dim();
        let df = T::lit(d as f64);
        let lit = T::lit;
        match self.fid() {
            1 => sphere_core(&self.shifted(x)),
            2 => {
                let mut z = self.shifted(x);
                tosz(&mut z);
                ellipsoid_core(&z)
            }
            3 => {
                let mut z = self.shifted(x);
                tosz(&mut z);
                tasy(&mut z, 0.2);
                scale_lambda(10.0, &mut z);
                rastrigin_core(&z)
            }
            4 => {
                let mut z = self.shifted(x);
                tosz(&mut z);
                for (i, v) in z.iter_mut().enumerate() {
                    let mut s = 10f64.powf(0.5 * ratio(i, d));
                    if *v > T::zero() && i % 2 == 0 {
                        s *= 10.0;
                    }
                    *v = *v * lit(s);
                }
                rastrigin_core(&z) + lit(100.0) * fpen(x)
            }
            5 => {
                let xo = &self.transform.xopt;
                (0..d)
                    .map(|i| {
                        let s = self.signs()[i] * lit(10f64.powf(ratio(i, d)));
                        let z = if xo[i] * x[i] < lit(25.0) { x[i] } else { xo[i] };
                        lit(5.0) * s.abs() - s * z
                    })
                    .sum()
            }
            6 => {
                let mut z = self.rot_r(&self.shifted(x));
                scale_lambda(10.0, &mut z);
                let z = self.rot_q(&z);
                let xo = &self.transform.xopt;
                let s: T = z
                    .iter()
                    .zip(xo)
                    .map(|(&v, &o)| {
                        let w = if v * o > T::zero() { lit(100.0) } else { T::one() };
                        (w * v) * (w * v)
                    })
                    .sum();
                tosz1(s).powf(lit(0.9))
            }
            7 => {
                let mut zh = self.rot_r(&self.shifted(x));
                scale_lambda(10.0, &mut zh);
                let half = lit(0.5);
                let zt: Vec<T> = zh
                    .iter()
                    .map(|&v| if v.abs() > half { (half + v).floor() } else { (half + lit(10.0) * v).floor() / lit(10.0) })
                    .collect();
                let z = self.rot_q(&zt);
                let e: T = z.iter().enumerate().map(|(i, &v)| lit(10f64.powf(2.0 * ratio(i, d))) * v * v).sum();
                lit(0.1) * (zh[0].abs() / lit(1e4)).max(e) + fpen(x)
            }
            8 => {
                let c = self.rosen_c();
                let z: Vec<T> = self.shifted(x).iter().map(|&v| c * v + T::one()).collect();
                rosenbrock_core(&z)
            }
            9 => {
                let c = self.rosen_c();
                let z: Vec<T> = self.rot_r(x).iter().map(|&v| c * v + lit(0.5)).collect();
                rosenbrock_core(&z)
            }
            10 => {
                let mut z = self.rot_r(&self.shifted(x));
                tosz(&mut z);
                ellipsoid_core(&z)
            }
            11 => {
                let mut z = self.rot_r(&self.shifted(x));
                tosz(&mut z);
                lit(1e6) * z[0] * z[0] + sphere_core(&z[1..])
            }
            12 => {
                let mut z = self.rot_r(&self.shifted(x));
                tasy(&mut z, 0.5);
                let z = self.rot_r(&z);
                z[0] * z[0] + lit(1e6) * sphere_core(&z[1..])
            }
            13 => {
                let mut z = self.rot_r(&self.shifted(x));
                scale_lambda(10.0, &mut z);
                let z = self.rot_q(&z);
                z[0] * z[0] + lit(100.0) * sphere_core(&z[1..]).sqrt()
            }
            14 => {
                let z = self.rot_r(&self.shifted(x));
                let s: T = z.iter().enumerate().map(|(i, &v)| v.abs().powf(lit(2.0 + 4.0 * ratio(i, d)))).sum();
                s.sqrt()
            }
            15 => {
                let mut z = self.rot_r(&self.shifted(x));
                tosz(&mut z);
                tasy(&mut z, 0.2);
                let mut z = self.rot_q(&z);
                scale_lambda(10.0, &mut z);
                rastrigin_core(&self.rot_r(&z))
            }
            16 => {
                let mut z = self.rot_r(&self.shifted(x));
                tosz(&mut z);
                let mut z = self.rot_q(&z);
                scale_lambda(0.01, &mut z);
                let z = self.rot_r(&z);
                let two_pi = lit(std::f64::consts::TAU);
                let f0: f64 = (0..12).map(|k| 0.5f64.powi(k) * (std::f64::consts::PI * 3f64.powi(k)).cos()).sum();
                let s: T = z
                    .iter()
                    .map(|&v| {
                        (0..12)
                            .map(|k| lit(0.5f64.powi(k)) * (two_pi * lit(3f64.powi(k)) * (v + lit(0.5))).cos())
                            .sum::<T>()
                    })
                    .sum();
                let m = s / df - lit(f0);
                lit(10.0) * m * m * m + lit(10.0) / df * fpen(x)
            }
            17 | 18 => {
                let alpha = if self.fid() == 17 { 10.0 } else { 1000.0 };
                let mut z = self.rot_r(&self.shifted(x));
                tasy(&mut z, 0.5);
                let mut z = self.rot_q(&z);
                scale_lambda(alpha, &mut z);
                schaffer_core(&z) + lit(10.0) * fpen(x)
            }
            19 => {
                let c = self.rosen_c();
                let z: Vec<T> = self.rot_r(x).iter().map(|&v| c * v + lit(0.5)).collect();
                let s: T = z
                    .windows(2)
                    .map(|w| {
                        let a = w[0] * w[0] - w[1];
                        let b = w[0] - T::one();
                        let si = lit(100.0) * a * a + b * b;
                        si / lit(4000.0) - si.cos()
                    })
                    .sum();
                lit(10.0) / lit((d - 1) as f64) * s + lit(10.0)
            }
            20 => {
                let two = lit(2.0);
                let xh: Vec<T> = x.iter().zip(self.signs()).map(|(&v, &s)| two * s * v).collect();
                let abs_opt: Vec<T> = self.transform.xopt.iter().map(|v| two * v.abs()).collect();
                let mut zh = xh.clone();
                for i in 1..d {
                    zh[i] = xh[i] + lit(0.25) * (xh[i - 1] - abs_opt[i - 1]);
                }
                let mut w: Vec<T> = zh.iter().zip(&abs_opt).map(|(&a, &b)| a - b).collect();
                scale_lambda(10.0, &mut w);
                let z: Vec<T> = w.iter().zip(&abs_opt).map(|(&a, &b)| lit(100.0) * (a + b)).collect();
                let s: T = z.iter().map(|&v| v * v.abs().sqrt().sin()).sum();
                let scaled: Vec<T> = z.iter().map(|&v| v / lit(100.0)).collect();
                -s / (lit(100.0) * df) + lit(SCHWEFEL_OFFSET) + lit(100.0) * fpen(&scaled)
            }
            21 | 22 => {
                let peaks = self.peaks().expect("gallagher peaks");
                let rx = self.rot_r(x);
                let inv = lit(-0.5) / df;
                let best = peaks
                    .rotated_centers
                    .iter()
                    .zip(&peaks.weights)
                    .zip(&peaks.scales)
                    .map(|((c, &w), s)| {
                        let q: T = rx.iter().zip(c).zip(s).map(|((&a, &b), &si)| si * (a - b) * (a - b)).sum();
                        w * (inv * q).exp()
                    })
                    .fold(T::neg_infinity(), T::max);
                let t = tosz1(lit(10.0) - best);
                t * t + fpen(x)
            }
            23 => {
                let mut z = self.rot_r(&self.shifted(x));
                scale_lambda(100.0, &mut z);
                let z = self.rot_q(&z);
                let expo = lit(10.0 / (d as f64).powf(1.2));
                let mut prod = T::one();
                for (i, &v) in z.iter().enumerate() {
                    let mut s = T::zero();
                    for j in 1..=32 {
                        let p = lit(2f64.powi(j));
                        let t = p * v;
                        s = s + (t - t.round()).abs() / p;
                    }
                    prod = prod * (T::one() + lit((i + 1) as f64) * s).powf(expo);
                }
                let k = lit(10.0) / (df * df);
                k * prod - k + fpen(x)
            }
            24 => {
                let dd = d as f64;
                let s = 1.0 - 1.0 / (2.0 * (dd + 20.0).sqrt() - 8.2);
                let mu0 = LUNACEK_MU0;
                let mu1 = -((mu0 * mu0 - 1.0) / s).sqrt();
                let xh: Vec<T> = x.iter().zip(self.signs()).map(|(&v, &sg)| lit(2.0) * sg * v).collect();
                let a: T = xh.iter().map(|&v| (v - lit(mu0)) * (v - lit(mu0))).sum();
                let b: T = xh.iter().map(|&v| (v - lit(mu1)) * (v - lit(mu1))).sum();
                let mut z = self.rot_r(&xh.iter().map(|&v| v - lit(mu0)).collect::<Vec<_>>());
                scale_lambda(100.0, &mut z);
                let z = self.rot_q(&z);
                let two_pi = lit(std::f64::consts::TAU);
                let cos: T = z.iter().map(|&v| (two_pi * v).cos()).sum();
                a.min(df + lit(s) * b) + lit(10.0) * (df - cos) + lit(1e4) * fpen(x)
            }
            other => unreachable!("no native function {other}"),
        }
    }
}
