use std::hint::black_box;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::SimError;
use crate::apf::{ApfConfig, AvoidanceField, InertiaCache};
use crate::geometry::{PrimitiveSkeleton, Vec3};
use crate::kinematics::{forward_kinematics, RobotModel};

/// Summary of a sample of durations in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct TimingStats {
    pub samples: usize,
    pub mean_us: f64,
    pub p50_us: f64,
    pub p99_us: f64,
    pub max_us: f64,
}

impl TimingStats {
    pub fn from_samples(us: &[f64]) -> Self {
        if us.is_empty() {
            return Self::default();
        }
        let mut sorted = us.to_vec();
        sorted.sort_by(f64::total_cmp);
        let pct = |p: f64| sorted[((sorted.len() - 1) as f64 * p).round() as usize];
        Self {
            samples: us.len(),
            mean_us: us.iter().sum::<f64>() / us.len() as f64,
            p50_us: pct(0.5),
            p99_us: pct(0.99),
            max_us: *sorted.last().expect("non-empty"),
        }
    }
}

/// Per-iteration timing of the avoidance computation, split into the state
/// update (kinematics and inertia) and the field (distances, forces, torques).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchReport {
    pub pairs: usize,
    pub skeletons: usize,
    pub total: TimingStats,
    pub state: TimingStats,
    pub field: TimingStats,
    /// Median of per-batch means; robust input for the scaling fit.
    pub robust_us: f64,
}

/// Times `repeats` full avoidance iterations at configuration `q`. The first
/// 10 % are discarded as warm-up.
pub fn benchmark_iteration(
    model: &RobotModel,
    env: &[PrimitiveSkeleton],
    q: &[f64],
    repeats: usize,
    cfg: &ApfConfig,
) -> Result<BenchReport, SimError> {
    let mut field = AvoidanceField::new(model, env, cfg)?;
    let qdot = vec![0.0; q.len()];
    let warm = repeats / 10;
    let mut state = Vec::with_capacity(repeats);
    let mut fld = Vec::with_capacity(repeats);
    for i in 0..repeats + warm {
        let t0 = Instant::now();
        let kin = forward_kinematics(model, black_box(q))?;
        let inertia = InertiaCache::new(model, &kin)?;
        let t1 = Instant::now();
        black_box(field.evaluate(model, &kin, q, &qdot, &inertia, 1e-3, cfg));
        let t2 = Instant::now();
        if i >= warm {
            state.push((t1 - t0).as_nanos() as f64 / 1e3);
            fld.push((t2 - t1).as_nanos() as f64 / 1e3);
        }
    }
    let total: Vec<f64> = state.iter().zip(&fld).map(|(a, b)| a + b).collect();
    let batch = (total.len() / 10).max(1);
    let mut means: Vec<f64> = total.chunks(batch).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    means.sort_by(f64::total_cmp);
    Ok(BenchReport {
        pairs: field.pairs().len(),
        skeletons: field.skeletons().len(),
        total: TimingStats::from_samples(&total),
        state: TimingStats::from_samples(&state),
        field: TimingStats::from_samples(&fld),
        robust_us: means[means.len() / 2],
    })
}

/// `n` world skeletons of mixed kinds scattered 2.5 to 4 m from the robot,
/// outside any field.
pub fn random_environment(n: usize, seed: u64) -> Vec<PrimitiveSkeleton> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |rng: &mut ChaCha8Rng| loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if let Some(u) = v.try_normalize(1e-6) {
            return u;
        }
    };
    (0..n)
        .map(|i| {
            let dir = unit(&mut rng);
            let o = Vec3::new(0.0, 0.0, 0.5) + dir * rng.random_range(2.5..4.0);
            let r = rng.random_range(0.0..0.1);
            let name = format!("obstacle_{i}");
            match i % 3 {
                0 => PrimitiveSkeleton::point(name, o, r),
                1 => PrimitiveSkeleton::line(name, o, unit(&mut rng) * rng.random_range(0.1..0.5), r),
                _ => {
                    let p = unit(&mut rng);
                    let q = p.cross(&unit(&mut rng)).normalize();
                    PrimitiveSkeleton::plane(name, o, p * rng.random_range(0.1..0.5), q * rng.random_range(0.1..0.5), r)
                }
            }
            .expect("generated skeletons are valid")
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub env_skeletons: usize,
    pub pairs: usize,
    pub mean_us: f64,
    pub robust_us: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares line through `(x, y)` with its coefficient of determination.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    LinearFit { slope, intercept, r2 }
}

/// Times the robot against growing random environments and fits time over
/// environment size.
pub fn scaling_series(
    model: &RobotModel,
    q: &[f64],
    sizes: &[usize],
    repeats: usize,
    seed: u64,
    cfg: &ApfConfig,
) -> Result<(Vec<ScalingPoint>, LinearFit), SimError> {
    let mut points = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let env = random_environment(n, seed);
        let rep = benchmark_iteration(model, &env, q, repeats, cfg)?;
        points.push(ScalingPoint { env_skeletons: n, pairs: rep.pairs, mean_us: rep.total.mean_us, robust_us: rep.robust_us });
    }
    let x: Vec<f64> = points.iter().map(|p| p.env_skeletons as f64).collect();
    let y: Vec<f64> = points.iter().map(|p| p.robust_us).collect();
    Ok((points.clone(), linear_fit(&x, &y)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_exact_line() {
        let f = linear_fit(&[1.0, 2.0, 3.0, 4.0], &[3.0, 5.0, 7.0, 9.0]);
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn percentiles() {
        let s: Vec<f64> = (1..=100).map(f64::from).collect();
        let t = TimingStats::from_samples(&s);
        assert_eq!((t.p50_us, t.p99_us, t.max_us), (51.0, 99.0, 100.0));
        assert!((t.mean_us - 50.5).abs() < 1e-12);
    }
}
