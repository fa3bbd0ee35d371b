//! Exact convex-analysis oracle. Everything runs on isotropic quadratics
//! L(theta) = (sigma / 2) * ||theta - c||^2, where strong convexity and
//! smoothness constants coincide (gamma = sigma), minimizers are closed
//! form, and the mixture bound below is tight (an equality). That makes
//! desk-scale numerical verification sharp instead of approximate.
//!
//! Verified statements, each exposed as a library function plus an entry in
//! [`verification_report`]:
//!
//! * the closed-form mixture minimizer and the distance bound
//!   alpha * ||grad L_p(theta_b*)|| / (alpha sigma_p + (1 - alpha) sigma_b),
//!   tight on this family and monotone in alpha;
//! * the drift margin L_curr(theta_prev*) - L_curr(theta_curr*) >= 0, with
//!   value (sigma / 2) * delta^2 for centers delta apart;
//! * the 1/t convergence rate of projected SGD with eta_t = 1/(sigma_b t)
//!   under additive Gaussian gradient noise, measured on the mean SQUARED
//!   distance (that is the quantity with a 1/t rate; the unsquared mean
//!   decays as 1/sqrt(t));
//! * the per-step recursion d_t <= (1 - 2/t) d_{t-1} + G^2 / (sigma^2 t^2)
//!   with G^2 the measured mean squared gradient norm bound;
//! * iteration counts to reach epsilon, their growth in alpha, and the
//!   schedule ranking (inverse-time reaches small epsilon, constant rates
//!   stall at their noise floors).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{Rng, Tensor};
use crate::optim::{lr_at, ScheduleSpec};
use crate::stats::ols_slope;

/// L(theta) = (curvature / 2) * ||theta - center||^2.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub center: Tensor,
    pub curvature: f64,
}

impl Quadratic {
    pub fn new(center: Tensor, curvature: f64) -> Result<Self> {
        if center.rank() != 1 || center.is_empty() {
            return Err(Error::invalid("quadratic center must be a nonempty vector"));
        }
        if !curvature.is_finite() || curvature <= 0.0 {
            return Err(Error::invalid(format!(
                "curvature must be > 0, got {curvature}"
            )));
        }
        Ok(Quadratic { center, curvature })
    }

    pub fn value(&self, theta: &Tensor) -> Result<f64> {
        let d = theta.sub(&self.center)?;
        Ok(0.5 * self.curvature * d.dot(&d)?)
    }

    pub fn gradient(&self, theta: &Tensor) -> Result<Tensor> {
        Ok(theta.sub(&self.center)?.scale(self.curvature))
    }
}

/// Benign/poison quadratic pair with gradient-noise level and feasible-set
/// radius. Smoothness constants are the curvatures on this family; they are
/// stored explicitly because the iteration-count formula consumes gamma_p.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexProblem {
    pub dim: usize,
    pub benign: Quadratic,
    pub poison: Quadratic,
    /// (gamma_b, gamma_p); equal to the curvatures for isotropic quadratics.
    pub smoothness: (f64, f64),
    /// Std of the additive isotropic Gaussian gradient noise.
    pub grad_noise: f64,
    /// Radius B of the feasible ball; SGD projects onto it.
    pub norm_bound: f64,
}

impl ConvexProblem {
    pub fn new(
        benign: Quadratic,
        poison: Quadratic,
        grad_noise: f64,
        norm_bound: f64,
    ) -> Result<Self> {
        let dim = benign.center.len();
        if poison.center.len() != dim {
            return Err(Error::shape(
                format!("poison center of dim {dim}"),
                format!("dim {}", poison.center.len()),
            ));
        }
        if !grad_noise.is_finite() || grad_noise < 0.0 {
            return Err(Error::invalid("grad_noise must be >= 0"));
        }
        if !norm_bound.is_finite() || norm_bound <= 0.0 {
            return Err(Error::invalid("norm_bound must be > 0"));
        }
        if benign.center.norm() > norm_bound || poison.center.norm() > norm_bound {
            return Err(Error::invalid(
                "minimizers must lie inside the norm bound ball",
            ));
        }
        let smoothness = (benign.curvature, poison.curvature);
        Ok(ConvexProblem {
            dim,
            benign,
            poison,
            smoothness,
            grad_noise,
            norm_bound,
        })
    }

    /// Random problem: centers uniform in the 0.8 * B ball, curvatures in
    /// [0.5, 3.0]. Deterministic given the generator state.
    pub fn random(dim: usize, grad_noise: f64, norm_bound: f64, rng: &mut Rng) -> ConvexProblem {
        let center = |rng: &mut Rng| loop {
            let v: Vec<f64> = (0..dim)
                .map(|_| rng.uniform(-0.8 * norm_bound, 0.8 * norm_bound))
                .collect();
            let t = Tensor::from_vec(v);
            if t.norm() <= 0.8 * norm_bound {
                return t;
            }
        };
        let benign = Quadratic::new(center(rng), rng.uniform(0.5, 3.0)).expect("valid");
        let poison = Quadratic::new(center(rng), rng.uniform(0.5, 3.0)).expect("valid");
        ConvexProblem::new(benign, poison, grad_noise, norm_bound).expect("valid by construction")
    }

    /// Gradient of alpha * L_p + (1 - alpha) * L_b at theta.
    pub fn mix_gradient(&self, alpha: f64, theta: &Tensor) -> Result<Tensor> {
        let gp = self.poison.gradient(theta)?.scale(alpha);
        let gb = self.benign.gradient(theta)?.scale(1.0 - alpha);
        gp.add(&gb)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(())
}

/// Closed-form minimizer of the mixture loss:
/// (alpha sigma_p theta_p* + (1 - alpha) sigma_b theta_b*)
///   / (alpha sigma_p + (1 - alpha) sigma_b).
pub fn mix_minimizer(p: &ConvexProblem, alpha: f64) -> Result<Tensor> {
    check_alpha(alpha)?;
    let wp = alpha * p.poison.curvature;
    let wb = (1.0 - alpha) * p.benign.curvature;
    let denom = wp + wb;
    p.poison
        .center
        .scale(wp / denom)
        .add(&p.benign.center.scale(wb / denom))
}

/// Distance bound alpha * ||grad L_p(theta_b*)|| / (alpha sigma_p +
/// (1 - alpha) sigma_b). Tight (equality) for isotropic quadratics.
pub fn mix_distance_bound(p: &ConvexProblem, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let grad_at_benign = p.poison.gradient(&p.benign.center)?;
    let denom = alpha * p.poison.curvature + (1.0 - alpha) * p.benign.curvature;
    Ok(alpha * grad_at_benign.norm() / denom)
}

/// Margin L_curr(theta_prev*) - L_curr(theta_curr*), evaluated on the
/// benign losses of two (drift-adjacent) problems. Non-negative because
/// theta_curr* minimizes L_curr; equals (sigma/2) * delta^2 for centers
/// delta apart.
pub fn refit_margin(prev: &ConvexProblem, curr: &ConvexProblem) -> Result<f64> {
    let at_prev = curr.benign.value(&prev.benign.center)?;
    let at_curr = curr.benign.value(&curr.benign.center)?;
    Ok(at_prev - at_curr)
}

/// Per-step statistics of projected SGD on the benign loss, averaged over
/// seeds. Index t holds the state after t steps; index 0 is the start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub steps: Vec<usize>,
    /// E ||theta_t - theta_b*|| (unsquared, the reported distance).
    pub mean_distance: Vec<f64>,
    /// E ||theta_t - theta_b*||^2 (the quantity with the 1/t rate).
    pub mean_sq_distance: Vec<f64>,
    /// Standard error of the squared distance across seeds.
    pub sem_sq_distance: Vec<f64>,
    /// max over steps of the measured E ||g_hat||^2 (the G^2 that the
    /// recursion check consumes).
    pub max_mean_sq_grad: f64,
}

fn project_ball(theta: &mut [f64], radius: f64) {
    let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > radius {
        let k = radius / norm;
        for v in theta.iter_mut() {
            *v *= k;
        }
    }
}

/// Runs projected SGD on the benign loss from `start` with additive
/// Gaussian gradient noise, one trajectory per seed, recording distance
/// statistics at every step.
pub fn sgd_trace(
    p: &ConvexProblem,
    start: &Tensor,
    schedule: &ScheduleSpec,
    t_max: usize,
    seeds: &[u64],
) -> Result<ConvergenceTrace> {
    if t_max == 0 {
        return Err(Error::invalid("t_max must be >= 1"));
    }
    if seeds.is_empty() {
        return Err(Error::EmptyInput("seed list".into()));
    }
    if start.len() != p.dim {
        return Err(Error::shape(format!("dim {}", p.dim), format!("{}", start.len())));
    }
    schedule.validate()?;
    let n = seeds.len() as f64;
    let mut sum_dist = vec![0.0; t_max + 1];
    let mut sum_sq = vec![0.0; t_max + 1];
    let mut sum_sq2 = vec![0.0; t_max + 1];
    let mut sum_grad_sq = vec![0.0; t_max];
    let target = p.benign.center.data();
    let sigma = p.benign.curvature;
    for &seed in seeds {
        let mut rng = Rng::derive(seed, &[0x5347_4452]);
        let mut theta: Vec<f64> = start.data().to_vec();
        project_ball(&mut theta, p.norm_bound);
        let record = |theta: &[f64], t: usize, sd: &mut [f64], ss: &mut [f64], ss2: &mut [f64]| {
            let sq: f64 = theta
                .iter()
                .zip(target.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            sd[t] += sq.sqrt();
            ss[t] += sq;
            ss2[t] += sq * sq;
        };
        record(&theta, 0, &mut sum_dist, &mut sum_sq, &mut sum_sq2);
        for t in 0..t_max {
            let lr = lr_at(schedule, t, t_max)?;
            let mut grad_sq = 0.0;
            for (j, th) in theta.iter_mut().enumerate() {
                let g = sigma * (*th - target[j]) + p.grad_noise * rng.normal();
                grad_sq += g * g;
                *th -= lr * g;
            }
            sum_grad_sq[t] += grad_sq;
            project_ball(&mut theta, p.norm_bound);
            record(&theta, t + 1, &mut sum_dist, &mut sum_sq, &mut sum_sq2);
        }
    }
    let mean_distance: Vec<f64> = sum_dist.iter().map(|s| s / n).collect();
    let mean_sq_distance: Vec<f64> = sum_sq.iter().map(|s| s / n).collect();
    let sem_sq_distance: Vec<f64> = sum_sq
        .iter()
        .zip(sum_sq2.iter())
        .map(|(&s, &s2)| {
            if seeds.len() < 2 {
                0.0
            } else {
                let m = s / n;
                let var = (s2 / n - m * m).max(0.0) * n / (n - 1.0);
                (var / n).sqrt()
            }
        })
        .collect();
    let max_mean_sq_grad = sum_grad_sq
        .iter()
        .map(|s| s / n)
        .fold(0.0f64, f64::max);
    Ok(ConvergenceTrace {
        steps: (0..=t_max).collect(),
        mean_distance,
        mean_sq_distance,
        sem_sq_distance,
        max_mean_sq_grad,
    })
}

/// Iteration counts to reach epsilon: the empirical first-hitting step of
/// the seed-averaged distance, the closed-form prediction
/// alpha * gamma_p / (eps * (alpha sigma_p + (1 - alpha) sigma_b)), and the
/// variant with gamma_p replaced by the actual gradient norm at theta_b*
/// (i.e. mix_distance_bound / eps). Both are reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationsToEps {
    pub alpha: f64,
    pub eps: f64,
    /// First step t with mean distance <= eps; None if the budget ran out.
    pub empirical: Option<usize>,
    pub predicted_iterations: f64,
    pub gradient_bound_iterations: f64,
}

pub fn iterations_to_eps(
    p: &ConvexProblem,
    alpha: f64,
    eps: f64,
    schedule: &ScheduleSpec,
    t_budget: usize,
    seeds: &[u64],
) -> Result<IterationsToEps> {
    check_alpha(alpha)?;
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be > 0"));
    }
    let start = mix_minimizer(p, alpha)?;
    let trace = sgd_trace(p, &start, schedule, t_budget, seeds)?;
    let empirical = trace.mean_distance.iter().position(|&d| d <= eps);
    let denom = alpha * p.poison.curvature + (1.0 - alpha) * p.benign.curvature;
    let predicted_iterations = alpha * p.smoothness.1 / (eps * denom);
    let gradient_bound_iterations = mix_distance_bound(p, alpha)? / eps;
    Ok(IterationsToEps {
        alpha,
        eps,
        empirical,
        predicted_iterations,
        gradient_bound_iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOutcome {
    pub schedule: ScheduleSpec,
    pub result: IterationsToEps,
}

/// Runs `iterations_to_eps` for each schedule with shared seeds, in the
/// given order. The inverse-time entry is expected to reach epsilon while
/// constant rates stall at their noise floor or take longer; callers (the
/// verification report, the acceptance suite) assert that contract.
pub fn compare_schedules(
    p: &ConvexProblem,
    alpha: f64,
    eps: f64,
    schedules: &[ScheduleSpec],
    t_budget: usize,
    seeds: &[u64],
) -> Result<Vec<ScheduleOutcome>> {
    if schedules.is_empty() {
        return Err(Error::EmptyInput("schedule list".into()));
    }
    schedules
        .iter()
        .map(|s| {
            Ok(ScheduleOutcome {
                schedule: *s,
                result: iterations_to_eps(p, alpha, eps, s, t_budget, seeds)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub tolerance: f64,
    pub observed: BTreeMap<String, f64>,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, tolerance: f64, detail: String) -> CheckResult {
        CheckResult {
            name: name.into(),
            passed,
            tolerance,
            observed: BTreeMap::new(),
            detail,
        }
    }

    fn with(mut self, key: &str, value: f64) -> CheckResult {
        self.observed.insert(key.into(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
}

const ALPHA_GRID: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// The reference problem the convergence checks run on: unit benign
/// curvature, stiffer poison loss about one unit away, mild noise, roomy
/// feasible ball.
pub fn default_problem(grad_noise: f64) -> ConvexProblem {
    let dim = 5;
    let mut b = vec![0.0; dim];
    b[0] = 0.25;
    let mut p = vec![0.0; dim];
    p[0] = 0.25;
    p[1] = 1.0;
    ConvexProblem::new(
        Quadratic::new(Tensor::from_vec(b), 1.0).expect("valid"),
        Quadratic::new(Tensor::from_vec(p), 2.0).expect("valid"),
        grad_noise,
        10.0,
    )
    .expect("valid")
}

fn check_bound_tightness() -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = Rng::derive(seed, &[0x4c45_4d41]);
        let p = ConvexProblem::random(5, 0.0, 10.0, &mut rng);
        for &alpha in &ALPHA_GRID {
            let dist = mix_minimizer(&p, alpha)?.sub(&p.benign.center)?.norm();
            let bound = mix_distance_bound(&p, alpha)?;
            worst = worst.max((dist - bound).abs());
        }
    }
    let tol = 1e-9;
    Ok(
        CheckResult::new(
            "bound_tightness",
            worst <= tol,
            tol,
            "max |distance - bound| over 20 random problems x 11 alphas".into(),
        )
        .with("max_abs_gap", worst),
    )
}

fn check_bound_monotonicity() -> Result<CheckResult> {
    let mut worst_drop = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = Rng::derive(seed, &[0x4d4f_4e4f]);
        let p = ConvexProblem::random(5, 0.0, 10.0, &mut rng);
        let bounds: Vec<f64> = ALPHA_GRID
            .iter()
            .map(|&a| mix_distance_bound(&p, a))
            .collect::<Result<_>>()?;
        for w in bounds.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
    }
    let tol = 1e-12;
    Ok(CheckResult::new(
        "bound_monotonicity",
        worst_drop <= tol,
        tol,
        "bound must be non-decreasing along the alpha grid".into(),
    )
    .with("worst_decrease", worst_drop))
}

fn check_prop1() -> Result<CheckResult> {
    let mut min_margin = f64::INFINITY;
    for seed in 0..100u64 {
        let mut rng = Rng::derive(seed, &[0x5052_4f50]);
        let prev = ConvexProblem::random(5, 0.0, 10.0, &mut rng);
        let curr = ConvexProblem::random(5, 0.0, 10.0, &mut rng);
        min_margin = min_margin.min(refit_margin(&prev, &curr)?);
    }
    // Exact-formula case: shared curvature sigma, centers delta apart.
    let sigma = 1.7;
    let delta = 0.6;
    let a = Quadratic::new(Tensor::from_vec(vec![0.0, 0.0]), sigma)?;
    let b = Quadratic::new(Tensor::from_vec(vec![delta, 0.0]), sigma)?;
    let prev = ConvexProblem::new(a.clone(), a.clone(), 0.0, 10.0)?;
    let curr = ConvexProblem::new(b, a, 0.0, 10.0)?;
    let margin = refit_margin(&prev, &curr)?;
    let formula = 0.5 * sigma * delta * delta;
    let formula_gap = (margin - formula).abs();
    let tol = 1e-9;
    Ok(CheckResult::new(
        "refit_margin",
        min_margin >= -1e-12 && formula_gap <= tol,
        tol,
        "margin >= 0 on 100 random pairs; equals sigma delta^2 / 2 in the exact case".into(),
    )
    .with("min_margin", min_margin)
    .with("formula_gap", formula_gap))
}

fn trace_seeds(n: u64) -> Vec<u64> {
    (0..n).map(|i| 1000 + i).collect()
}

fn check_rate_slope() -> Result<CheckResult> {
    let p = default_problem(0.1);
    let start = mix_minimizer(&p, 0.5)?;
    let schedule = ScheduleSpec::InverseTime {
        sigma: p.benign.curvature,
    };
    let trace = sgd_trace(&p, &start, &schedule, 10_000, &trace_seeds(20))?;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for t in 100..=10_000usize {
        xs.push((t as f64).ln());
        ys.push(trace.mean_sq_distance[t].ln());
    }
    let slope = ols_slope(&xs, &ys);
    let passed = (-1.2..=-0.8).contains(&slope);
    Ok(CheckResult::new(
        "rate_slope",
        passed,
        0.2,
        "log-log slope of mean squared distance vs t over [1e2, 1e4]".into(),
    )
    .with("slope", slope))
}

fn check_alpha_monotonicity() -> Result<CheckResult> {
    let p = default_problem(0.1);
    let schedule = ScheduleSpec::InverseTime {
        sigma: p.benign.curvature,
    };
    let alphas = [0.1, 0.3, 0.5, 0.7, 0.9];
    let mut iters = Vec::new();
    for &a in &alphas {
        let r = iterations_to_eps(&p, a, 1e-2, &schedule, 10_000, &trace_seeds(20))?;
        match r.empirical {
            Some(t) => iters.push(t as f64),
            None => {
                return Ok(CheckResult::new(
                    "alpha_monotonicity",
                    false,
                    0.0,
                    format!("alpha {a}: budget exhausted before reaching eps"),
                ))
            }
        }
    }
    let non_decreasing = iters.windows(2).all(|w| w[1] >= w[0]);
    let mut res = CheckResult::new(
        "alpha_monotonicity",
        non_decreasing,
        0.0,
        "empirical iterations to eps=1e-2 non-decreasing in alpha".into(),
    );
    for (a, t) in alphas.iter().zip(iters.iter()) {
        res = res.with(&format!("iterations_alpha_{a}"), *t);
    }
    Ok(res)
}

fn check_schedule_ranking() -> Result<CheckResult> {
    let p = default_problem(0.1);
    let sigma = p.benign.curvature;
    let schedules = vec![
        ScheduleSpec::InverseTime { sigma },
        ScheduleSpec::Constant { lr: 0.5 / sigma },
        ScheduleSpec::Constant { lr: 0.1 / sigma },
        ScheduleSpec::Constant { lr: 0.01 / sigma },
    ];
    let outcomes = compare_schedules(&p, 0.5, 1e-3, &schedules, 80_000, &trace_seeds(20))?;
    let inv = &outcomes[0].result;
    let mut passed = inv.empirical.is_some();
    let mut res = CheckResult::new(
        "schedule_ranking",
        false,
        0.0,
        "inverse-time reaches eps=1e-3; constant rates stall or take longer".into(),
    );
    let inv_t = inv.empirical.map(|t| t as f64).unwrap_or(f64::INFINITY);
    res = res.with("inverse_time_iterations", inv_t);
    for o in &outcomes[1..] {
        let lr = match o.schedule {
            ScheduleSpec::Constant { lr } => lr,
            _ => unreachable!(),
        };
        match o.result.empirical {
            None => res = res.with(&format!("constant_{lr}_iterations"), f64::INFINITY),
            Some(t) => {
                res = res.with(&format!("constant_{lr}_iterations"), t as f64);
                if (t as f64) <= inv_t {
                    passed = false;
                }
            }
        }
    }
    res.passed = passed;
    Ok(res)
}

fn check_distance_recursion() -> Result<CheckResult> {
    let p = default_problem(0.1);
    let start = mix_minimizer(&p, 0.5)?;
    let sigma = p.benign.curvature;
    let schedule = ScheduleSpec::InverseTime { sigma };
    let t_max = 10_000usize;
    let trace = sgd_trace(&p, &start, &schedule, t_max, &trace_seeds(20))?;
    let g2 = trace.max_mean_sq_grad;
    let mut worst = f64::NEG_INFINITY;
    for t in 100..=t_max {
        let bound = (1.0 - 2.0 / t as f64) * trace.mean_sq_distance[t - 1]
            + g2 / (sigma * sigma * (t * t) as f64);
        let slack = 3.0 * (trace.sem_sq_distance[t] + trace.sem_sq_distance[t - 1]);
        worst = worst.max(trace.mean_sq_distance[t] - bound - slack);
    }
    let tol = 1e-12;
    Ok(CheckResult::new(
        "distance_recursion",
        worst <= tol,
        tol,
        "d_t <= (1 - 2/t) d_{t-1} + G^2/(sigma^2 t^2) + 3 sem, t in [100, 1e4]".into(),
    )
    .with("worst_violation", worst)
    .with("measured_g_squared", g2))
}

/// Runs every theory check with its pinned tolerance and fixed seeds.
pub fn verification_report() -> Result<VerificationReport> {
    let checks = vec![
        check_bound_tightness()?,
        check_bound_monotonicity()?,
        check_prop1()?,
        check_rate_slope()?,
        check_alpha_monotonicity()?,
        check_schedule_ranking()?,
        check_distance_recursion()?,
    ];
    let all_passed = checks.iter().all(|c| c.passed);
    Ok(VerificationReport { checks, all_passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean;

    fn handbook_problem() -> ConvexProblem {
        // sigma_b = 1 at the origin, sigma_p = 2 at e1.
        ConvexProblem::new(
            Quadratic::new(Tensor::from_vec(vec![0.0, 0.0, 0.0]), 1.0).unwrap(),
            Quadratic::new(Tensor::from_vec(vec![1.0, 0.0, 0.0]), 2.0).unwrap(),
            0.0,
            10.0,
        )
        .unwrap()
    }

    #[test]
    fn mix_minimizer_endpoints_and_handbook_value() {
        let p = handbook_problem();
        assert_eq!(mix_minimizer(&p, 0.0).unwrap(), p.benign.center);
        assert_eq!(mix_minimizer(&p, 1.0).unwrap(), p.poison.center);
        let mid = mix_minimizer(&p, 0.5).unwrap();
        assert!((mid.data()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!(mid.data()[1].abs() < 1e-15 && mid.data()[2].abs() < 1e-15);
        assert!(mix_minimizer(&p, 1.5).is_err());
    }

    #[test]
    fn mix_minimizer_agrees_with_gradient_descent_oracle() {
        // Independent check: minimize the mixture loss numerically.
        for seed in 0..5u64 {
            let mut rng = Rng::new(seed);
            let p = ConvexProblem::random(4, 0.0, 10.0, &mut rng);
            for alpha in [0.2, 0.5, 0.8] {
                let mut theta = Tensor::zeros(vec![4]);
                for _ in 0..20_000 {
                    let g = p.mix_gradient(alpha, &theta).unwrap();
                    theta = theta.sub(&g.scale(0.2)).unwrap();
                    if g.norm() < 1e-13 {
                        break;
                    }
                }
                let closed = mix_minimizer(&p, alpha).unwrap();
                assert!(
                    theta.sub(&closed).unwrap().norm() < 1e-9,
                    "seed {seed} alpha {alpha}"
                );
            }
        }
    }

    #[test]
    fn mix_distance_bound_matches_handbook_value_and_is_tight() {
        let p = handbook_problem();
        assert_eq!(mix_distance_bound(&p, 0.0).unwrap(), 0.0);
        let b = mix_distance_bound(&p, 0.5).unwrap();
        assert!((b - 2.0 / 3.0).abs() < 1e-15);
        let d = mix_minimizer(&p, 0.5)
            .unwrap()
            .sub(&p.benign.center)
            .unwrap()
            .norm();
        assert!((b - d).abs() < 1e-15);
    }

    #[test]
    fn prop1_zero_for_identical_problems() {
        let p = handbook_problem();
        assert_eq!(refit_margin(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn sgd_fixed_point_and_geometric_decay() {
        let p = handbook_problem();
        // Start at the minimizer with no noise: distance stays 0.
        let trace = sgd_trace(
            &p,
            &p.benign.center,
            &ScheduleSpec::Constant { lr: 0.1 },
            50,
            &[1, 2],
        )
        .unwrap();
        assert!(trace.mean_distance.iter().all(|&d| d == 0.0));

        // Constant lr below 2/sigma: exact geometric decay at rate |1 - lr sigma|.
        let start = Tensor::from_vec(vec![2.0, 0.0, 0.0]);
        let lr = 0.3;
        let trace = sgd_trace(&p, &start, &ScheduleSpec::Constant { lr }, 30, &[3]).unwrap();
        let rate = (1.0f64 - lr * p.benign.curvature).abs();
        for t in 1..=30 {
            let expect = 2.0 * rate.powi(t as i32);
            assert!(
                (trace.mean_distance[t] - expect).abs() < 1e-9,
                "t={t}: {} vs {expect}",
                trace.mean_distance[t]
            );
        }
    }

    #[test]
    fn projection_keeps_iterates_in_ball() {
        let p = ConvexProblem::new(
            Quadratic::new(Tensor::from_vec(vec![0.9, 0.0]), 1.0).unwrap(),
            Quadratic::new(Tensor::from_vec(vec![0.0, 0.9]), 1.0).unwrap(),
            2.0,
            1.0,
        )
        .unwrap();
        let trace = sgd_trace(
            &p,
            &p.poison.center,
            &ScheduleSpec::Constant { lr: 0.5 },
            200,
            &[7],
        )
        .unwrap();
        // Distance to a center inside the unit ball can never exceed 2B.
        assert!(trace.mean_distance.iter().all(|&d| d <= 2.0 + 1e-12));
    }

    #[test]
    fn iterations_already_close_is_zero() {
        let p = handbook_problem();
        let r = iterations_to_eps(
            &p,
            0.5,
            1.0,
            &ScheduleSpec::InverseTime { sigma: 1.0 },
            100,
            &[1, 2, 3],
        )
        .unwrap();
        // ||theta_mix - theta_b*|| = 2/3 <= eps = 1.
        assert_eq!(r.empirical, Some(0));
        assert!(r.predicted_iterations > 0.0);
        assert!(r.gradient_bound_iterations > 0.0);
    }

    #[test]
    fn iterations_budget_exhaustion_reports_none() {
        let p = default_problem(0.5);
        let r = iterations_to_eps(
            &p,
            0.5,
            1e-9,
            &ScheduleSpec::Constant { lr: 0.5 },
            200,
            &trace_seeds(5),
        )
        .unwrap();
        assert_eq!(r.empirical, None);
    }

    #[test]
    fn eps_halving_never_speeds_up_hitting() {
        let p = default_problem(0.1);
        let sched = ScheduleSpec::InverseTime { sigma: 1.0 };
        let seeds = trace_seeds(10);
        let t1 = iterations_to_eps(&p, 0.5, 2e-2, &sched, 5_000, &seeds)
            .unwrap()
            .empirical
            .unwrap();
        let t2 = iterations_to_eps(&p, 0.5, 1e-2, &sched, 5_000, &seeds)
            .unwrap()
            .empirical
            .unwrap();
        assert!(t2 >= t1, "t(eps/2)={t2} < t(eps)={t1}");
    }

    #[test]
    fn noiseless_schedules_with_identical_lr_coincide() {
        let p = handbook_problem();
        let start = Tensor::from_vec(vec![2.0, 1.0, 0.0]);
        // Inverse time with sigma chosen so step 0 lr matches the constant.
        let a = sgd_trace(&p, &start, &ScheduleSpec::Constant { lr: 0.5 }, 1, &[4]).unwrap();
        let b = sgd_trace(
            &p,
            &start,
            &ScheduleSpec::InverseTime { sigma: 2.0 },
            1,
            &[4],
        )
        .unwrap();
        assert_eq!(a.mean_distance[1], b.mean_distance[1]);
    }

    #[test]
    fn constant_lr_noise_floor_scales_with_lr() {
        // Stationary mean squared distance of the linear recursion is
        // lr^2 nu^2 d / (1 - (1 - lr sigma)^2); verify within 20%.
        let p = default_problem(0.1);
        let seeds: Vec<u64> = (0..40).collect();
        for lr in [0.5, 0.1] {
            let trace = sgd_trace(
                &p,
                &p.benign.center,
                &ScheduleSpec::Constant { lr },
                4_000,
                &seeds,
            )
            .unwrap();
            let tail = mean(&trace.mean_sq_distance[2_000..]);
            let predict = lr * lr * 0.01 * 5.0 / (1.0 - (1.0 - lr).powi(2));
            assert!(
                (tail - predict).abs() / predict < 0.2,
                "lr {lr}: tail {tail} vs predicted {predict}"
            );
        }
    }

    #[test]
    fn full_verification_report_passes() {
        let report = verification_report().unwrap();
        for c in &report.checks {
            assert!(c.passed, "check {} failed: {:?}", c.name, c.observed);
        }
        assert!(report.all_passed);
        assert_eq!(report.checks.len(), 7);
    }
}
