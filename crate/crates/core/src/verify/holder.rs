//! Hölder exponent estimate from the upper envelope of `|u(x) − u(y)|`
//! against the inner distance `d_M(x, y)`.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear_fit;
use crate::error::{Error, Result};
use crate::fem::ScalarField;
use crate::geometry::{InnerMetric, Mesh};

/// Number of logarithmic distance bins.
pub const HOLDER_BINS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    /// Fitted exponent; `None` for constant fields or too few envelope points.
    pub alpha: Option<f64>,
    /// Coefficient of determination of the envelope regression.
    pub fit_quality: f64,
    pub pairs: usize,
    /// `(log d, log |Δu|)` regression inputs.
    pub envelope: Vec<(f64, f64)>,
}

impl HolderFit {
    fn sentinel(pairs: usize) -> Self {
        Self {
            alpha: None,
            fit_quality: 0.0,
            pairs,
            envelope: Vec::new(),
        }
    }
}

/// Samples vertex pairs, bins those with a nonnegligible difference by
/// `log d_M`, and regresses `log sup_{d ≤ D} |Δu|` against the log distance
/// of the attaining pair, with `D` running over the bin edges of the lower
/// half of the log-distance range. A bin contributes only when it raises
/// the running maximum.
///
/// When `n_pairs` covers every unordered pair, all pairs are used;
/// otherwise `⌈√n_pairs⌉` random sources each get an equal share of random
/// targets.
pub fn holder_exponent(mesh: &Mesh, u: &ScalarField, n_pairs: usize, seed: u64) -> Result<HolderFit> {
    u.check(mesh)?;
    if n_pairs == 0 {
        return Err(Error::invalid("need at least one vertex pair"));
    }
    let n = mesh.n_vertices();
    let vals = u.values();
    let (lo, hi) = vals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if lo == hi || n < 2 {
        return Ok(HolderFit::sentinel(0));
    }

    let metric = InnerMetric::new(mesh);
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    // differences at rounding level carry no information
    let floor = 1e-12 * (hi - lo);
    let mut record = |d: f64, du: f64| {
        if d > 0.0 && d.is_finite() && du > floor {
            pairs.push((d, du));
        }
    };
    if n_pairs >= n * (n - 1) / 2 {
        for i in 0..n {
            let dist = metric.distances_from(i);
            for j in i + 1..n {
                record(dist[j], (vals[i] - vals[j]).abs());
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_src = ((n_pairs as f64).sqrt().ceil() as usize).clamp(1, n);
        let sources = sample(&mut rng, n, n_src).into_vec();
        for (k, &s) in sources.iter().enumerate() {
            let share = n_pairs / n_src + usize::from(k < n_pairs % n_src);
            let dist = metric.distances_from(s);
            for _ in 0..share {
                let t = rng.gen_range(0..n);
                record(dist[t], (vals[s] - vals[t]).abs());
            }
        }
    }
    let count = pairs.len();
    if count == 0 {
        return Ok(HolderFit::sentinel(0));
    }

    let (lmin, lmax) = pairs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &(d, _)| {
        (l.min(d.ln()), h.max(d.ln()))
    });
    let width = (lmax - lmin) / HOLDER_BINS as f64;
    // per bin: (largest |Δu|, log d of the pair attaining it)
    let mut bins: Vec<Option<(f64, f64)>> = vec![None; HOLDER_BINS];
    for &(d, du) in &pairs {
        let ld = d.ln();
        let b = if width > 0.0 {
            (((ld - lmin) / width) as usize).min(HOLDER_BINS - 1)
        } else {
            0
        };
        if bins[b].map_or(true, |(m, _)| du > m) {
            bins[b] = Some((du, ld));
        }
    }
    // running maximum: the modulus of continuity sup_{d <= D} |Δu|
    let mut envelope: Vec<(f64, f64)> = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    for bin in bins[..HOLDER_BINS / 2].iter().flatten() {
        if best.map_or(true, |(m, _)| bin.0 > m) {
            best = Some(*bin);
            envelope.push((bin.1, bin.0.ln()));
        }
    }
    Ok(match linear_fit(&envelope) {
        Some((slope, r2)) if envelope.len() >= 3 => HolderFit {
            alpha: Some(slope),
            fit_quality: r2,
            pairs: count,
            envelope,
        },
        _ => HolderFit {
            alpha: None,
            fit_quality: 0.0,
            pairs: count,
            envelope,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_disk, build_unit_square};

    #[test]
    fn linear_field_is_lipschitz() {
        let m = build_unit_square(16).unwrap();
        let u = ScalarField::from_fn(&m, |p| p[0]);
        let fit = holder_exponent(&m, &u, 20_000, 1).unwrap();
        let a = fit.alpha.unwrap();
        assert!((0.9..=1.1).contains(&a), "{a}");
    }

    #[test]
    fn square_root_profile() {
        let m = build_disk(1.0, 16, 64).unwrap();
        let u = ScalarField::from_fn(&m, |p| p[0].hypot(p[1]).sqrt());
        let fit = holder_exponent(&m, &u, usize::MAX, 0).unwrap();
        let a = fit.alpha.unwrap();
        assert!((0.4..=0.6).contains(&a), "{a} {:?}", fit.envelope);
    }

    #[test]
    fn constant_field_gives_sentinel() {
        let m = build_unit_square(4).unwrap();
        let fit = holder_exponent(&m, &ScalarField::constant(&m, 2.0), 100, 0).unwrap();
        assert_eq!(fit.alpha, None);
    }

    #[test]
    fn affine_renormalization_only_shifts_intercept() {
        let m = build_unit_square(10).unwrap();
        let u = ScalarField::from_fn(&m, |p| (3.0 * p[0]).sin() + p[1] * p[1]);
        let a = holder_exponent(&m, &u, 5000, 4).unwrap();
        let b = holder_exponent(&m, &u.map(|v| -4.0 * v), 5000, 4).unwrap();
        assert_eq!(a.envelope.len(), b.envelope.len());
        for (x, y) in a.envelope.iter().zip(&b.envelope) {
            assert_eq!(x.0.to_bits(), y.0.to_bits());
            assert!((x.1 + 4f64.ln() - y.1).abs() < 1e-12);
        }
        assert!((a.alpha.unwrap() - b.alpha.unwrap()).abs() < 1e-12);
    }
}
