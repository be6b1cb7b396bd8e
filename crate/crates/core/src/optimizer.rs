//! Projected gradient descent with Barzilai–Borwein trial steps and Armijo
//! backtracking, plus continuation in α or ε.
//!
//! The update is `u ← Π(u − t g)` where `g = −c·cell·G` is the gradient of
//! the discrete energy with respect to the nodal values, `G` the tangential
//! Euler–Lagrange expression and `Π` the nearest-point projection onto the
//! target. Measuring steps against this nodal gradient keeps the stable step
//! size independent of the mesh width.
//!
//! With [`StepMetric::Sobolev`] the step direction becomes `P_T M⁻¹ G` for
//! the Fourier-diagonal metric `M` of [`crate::precondition`], and the BB
//! quotients are taken in that metric. Critical points are unchanged; only
//! the path to them is.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::MapField;
use crate::functionals::{sup_norm, EnergyBreakdown, Functional};
use crate::precondition::SobolevMetric;
use crate::scalar::Scalar;
use crate::table::{float, Table};
use crate::target::project_tangent_nodes;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig<T> {
    /// Stop once the sup-norm of the Euler–Lagrange expression is below this.
    pub tolerance: T,
    pub max_iterations: usize,
    pub armijo_c1: T,
    pub backtrack: T,
    /// Safeguard for the Barzilai–Borwein trial step.
    pub step_min: T,
    pub step_max: T,
    /// Trial step of the first iteration, before any BB information exists.
    pub initial_step: T,
    /// Backtracking halvings allowed before the run counts as stalled.
    pub max_backtracks: usize,
    pub bb_rule: BbRule,
    pub metric: StepMetric,
}

/// Metric in which descent directions and BB quotients are measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMetric {
    /// Plain nodal ℓ².
    Nodal,
    /// [`SobolevMetric`] with the functional's ε (zero for α-energies);
    /// periodic grids only.
    Sobolev,
}

/// Which Barzilai–Borwein quotient proposes the trial step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BbRule {
    /// `<s,s>/<s,y>`
    Long,
    /// `<s,y>/<y,y>`
    Short,
    /// Long on odd iterations, short on even ones.
    Alternating,
}

impl<T: Scalar> Default for OptimizerConfig<T> {
    fn default() -> Self {
        OptimizerConfig {
            tolerance: T::lit(1e-8),
            max_iterations: 200_000,
            armijo_c1: T::lit(1e-4),
            backtrack: T::lit(0.5),
            step_min: T::lit(1e-6),
            step_max: T::lit(1e2),
            initial_step: T::lit(1e-2),
            max_backtracks: 60,
            bb_rule: BbRule::Alternating,
            metric: StepMetric::Nodal,
        }
    }
}

impl<T: Scalar> OptimizerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_owned()));
        if !(self.tolerance > T::zero()) {
            return bad("tolerance must be positive");
        }
        if !(self.backtrack > T::zero() && self.backtrack < T::one()) {
            return bad("backtracking factor must lie in (0, 1)");
        }
        if !(self.armijo_c1 > T::zero() && self.armijo_c1 < T::one()) {
            return bad("Armijo constant must lie in (0, 1)");
        }
        if !(self.step_min > T::zero() && self.step_max >= self.step_min) {
            return bad("step safeguard must satisfy 0 < min <= max");
        }
        if !(self.initial_step > T::zero()) {
            return bad("initial step must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// Backtracking could not find an Armijo step; usually the energy has
    /// hit its rounding floor.
    Stalled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord<T> {
    pub iteration: usize,
    pub energy: T,
    /// Sup-norm of the Euler–Lagrange expression at this iterate.
    pub grad_norm: T,
    /// Accepted step; zero for the starting point.
    pub step: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace<T> {
    pub records: Vec<IterationRecord<T>>,
    pub stop: StopReason,
    /// Trial energies evaluated, including rejected ones.
    pub evaluations: usize,
}

impl<T: Scalar> RunTrace<T> {
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iteration)
    }

    pub fn final_energy(&self) -> T {
        self.records.last().map_or(T::nan(), |r| r.energy)
    }

    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["iteration", "energy", "grad_norm", "step"]);
        for r in &self.records {
            t.push(vec![
                r.iteration.to_string(),
                float(r.energy),
                float(r.grad_norm),
                float(r.step),
            ]);
        }
        t
    }
}

/// Sup-norm of the tangential Euler–Lagrange expression.
pub fn el_residual<T: Scalar>(u: &MapField<T>, functional: &Functional<T>) -> T {
    sup_norm(&functional.gradient(u), u.m())
}

/// Runs [`minimize_in_place`] on a copy of `u0`.
pub fn minimize<T: Scalar>(
    u0: &MapField<T>,
    functional: &Functional<T>,
    config: &OptimizerConfig<T>,
) -> Result<(MapField<T>, RunTrace<T>)> {
    let mut u = u0.clone();
    let trace = minimize_in_place(&mut u, functional, config)?;
    Ok((u, trace))
}

/// Below this relative size an energy difference is treated as rounding noise.
const ROUNDOFF_REGIME: f64 = 1e-10;

fn l2_dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + *x * *y)
}

/// Minimizes in place. On error `u` holds the last accepted iterate.
pub fn minimize_in_place<T: Scalar>(
    u: &mut MapField<T>,
    functional: &Functional<T>,
    config: &OptimizerConfig<T>,
) -> Result<RunTrace<T>> {
    config.validate()?;
    u.check_on_target()?;
    let m = u.m();
    let grid = u.grid().clone();
    let cell = grid.cell();
    let scale = functional.variation_scale();
    let nodal = scale * cell;

    let ev0 = functional.evaluate(u);
    let mut energy = grid.integrate(&ev0.density);
    if !energy.is_finite() {
        return Err(Error::NonFiniteEnergy { iteration: 0 });
    }
    let mut el = functional.gradient_from(u, &ev0);
    let mut density = ev0.density;
    let mut residual = sup_norm(&el, m);
    let mut records = vec![IterationRecord {
        iteration: 0,
        energy,
        grad_norm: residual,
        step: T::zero(),
    }];

    let metric = match config.metric {
        StepMetric::Nodal => None,
        StepMetric::Sobolev => {
            let eps = match functional {
                Functional::Biharmonic(e) => e.value(),
                Functional::Alpha(_) => T::zero(),
            };
            Some(SobolevMetric::new(&grid, eps))
        }
    };
    // descent direction `p = H⁻¹(-g)` for the metric `H` (`nodal · I` or
    // `nodal · M`); steps are multiples of `p`
    let target = *u.target();
    let direction = |el: &[T], base: &[T]| -> Vec<T> {
        let mut p = el.to_vec();
        match &metric {
            None => p.iter_mut().for_each(|x| *x *= nodal),
            Some(s) => {
                s.apply(&mut p, m, true);
                project_tangent_nodes(&target, base, &mut p);
            }
        }
        p
    };

    let mut step = config.initial_step;
    let mut trial = u.values().to_vec();
    let mut dir = direction(&el, u.values());
    let mut stop = StopReason::MaxIterations;
    let mut evaluations = 0;
    for it in 1..=config.max_iterations {
        if residual <= config.tolerance {
            stop = StopReason::Converged;
            break;
        }
        let gnorm2 = nodal * l2_dot(&el, &dir);
        let mut t = step;
        let mut accepted = None;
        let mut all_nonfinite = true;
        for _ in 0..=config.max_backtracks {
            for ((x, u0), d) in trial.iter_mut().zip(u.values()).zip(&dir) {
                *x = *u0 + t * *d;
            }
            let cand = MapField::from_ambient(grid.clone(), *u.target(), std::mem::take(&mut trial))?;
            evaluations += 1;
            let ev = functional.evaluate(&cand);
            let mut delta = cell
                * ev.density
                    .iter()
                    .zip(&density)
                    .fold(T::zero(), |s, (a, b)| s + (*a - *b));
            let mut grad_t = None;
            if delta.abs() <= T::lit(ROUNDOFF_REGIME) * energy.abs() {
                // Energy differences are drowned in rounding here; use the
                // trapezoid rule on the directional derivatives instead.
                let gt = functional.gradient_from(&cand, &ev);
                let mut acc = T::zero();
                for k in 0..gt.len() {
                    acc += (el[k] + gt[k]) * (cand.values()[k] - u.values()[k]);
                }
                delta = -T::lit(0.5) * scale * cell * acc;
                grad_t = Some(gt);
            }
            all_nonfinite &= !delta.is_finite();
            if delta.is_finite() && delta <= -config.armijo_c1 * t * gnorm2 {
                accepted = Some((cand, ev, delta, grad_t));
                break;
            }
            trial = cand.into_values();
            t *= config.backtrack;
        }
        let Some((cand, ev, delta, grad_t)) = accepted else {
            if all_nonfinite {
                return Err(Error::NonFiniteEnergy { iteration: it });
            }
            stop = StopReason::Stalled;
            break;
        };
        let new_el = grad_t.unwrap_or_else(|| functional.gradient_from(&cand, &ev));

        // Barzilai–Borwein with s = Δu and y = Δg, in the metric H:
        // long <s,Hs>/<s,y>, short <s,y>/<y,H⁻¹y>
        let long = match config.bb_rule {
            BbRule::Long => true,
            BbRule::Short => false,
            BbRule::Alternating => it % 2 == 1,
        };
        let s: Vec<T> = cand.values().iter().zip(u.values()).map(|(a, b)| *a - *b).collect();
        let y: Vec<T> = new_el.iter().zip(&el).map(|(a, b)| -nodal * (*a - *b)).collect();
        let sy = l2_dot(&s, &y);
        let quotient = match (&metric, long) {
            (None, true) => l2_dot(&s, &s) / sy,
            (None, false) => sy / l2_dot(&y, &y),
            (Some(metric), true) => {
                let mut hs = s.clone();
                metric.apply(&mut hs, m, false);
                nodal * l2_dot(&s, &hs) / sy
            }
            (Some(metric), false) => {
                let mut hy = y.clone();
                metric.apply(&mut hy, m, true);
                sy * nodal / l2_dot(&y, &hy)
            }
        };
        step = if sy > T::zero() { quotient } else { t * T::lit(2.0) };
        step = step.max(config.step_min).min(config.step_max);

        trial = std::mem::replace(u, cand).into_values();
        density = ev.density;
        energy += delta;
        el = new_el;
        dir = direction(&el, u.values());
        residual = sup_norm(&el, m);
        records.push(IterationRecord {
            iteration: it,
            energy,
            grad_norm: residual,
            step: t,
        });
    }
    if stop == StopReason::MaxIterations && residual <= config.tolerance {
        stop = StopReason::Converged;
    }
    Ok(RunTrace {
        records,
        stop,
        evaluations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Alpha,
    Epsilon,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSpec<T> {
    pub value: T,
    pub config: Option<OptimizerConfig<T>>,
}

/// Strictly decreasing α (> 1) or ε (> 0) values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationSchedule<T> {
    kind: ScheduleKind,
    stages: Vec<StageSpec<T>>,
}

impl<T: Scalar> ContinuationSchedule<T> {
    pub fn new(kind: ScheduleKind, values: &[T]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empty schedule".into()));
        }
        let floor = match kind {
            ScheduleKind::Alpha => T::one(),
            ScheduleKind::Epsilon => T::zero(),
        };
        for (i, v) in values.iter().enumerate() {
            if !(*v > floor) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "schedule entry {i} = {v} must exceed {floor}"
                )));
            }
            if i > 0 && !(*v < values[i - 1]) {
                return Err(Error::InvalidParameter("schedule must be strictly decreasing".into()));
            }
        }
        Ok(ContinuationSchedule {
            kind,
            stages: values.iter().map(|&value| StageSpec { value, config: None }).collect(),
        })
    }

    pub fn alpha(values: &[T]) -> Result<Self> {
        Self::new(ScheduleKind::Alpha, values)
    }

    pub fn epsilon(values: &[T]) -> Result<Self> {
        Self::new(ScheduleKind::Epsilon, values)
    }

    pub fn with_override(mut self, stage: usize, config: OptimizerConfig<T>) -> Result<Self> {
        config.validate()?;
        let n = self.stages.len();
        let s = self
            .stages
            .get_mut(stage)
            .ok_or_else(|| Error::InvalidParameter(format!("stage {stage} out of range (schedule has {n})")))?;
        s.config = Some(config);
        Ok(self)
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn stages(&self) -> &[StageSpec<T>] {
        &self.stages
    }

    pub fn values(&self) -> Vec<T> {
        self.stages.iter().map(|s| s.value).collect()
    }

    pub fn functional(&self, stage: usize) -> Result<Functional<T>> {
        let v = self.stages[stage].value;
        match self.kind {
            ScheduleKind::Alpha => Functional::alpha(v),
            ScheduleKind::Epsilon => Functional::biharmonic(v),
        }
    }
}

/// Serializable per-stage summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary<T> {
    pub stage: usize,
    pub kind: ScheduleKind,
    pub parameter: T,
    pub energy: EnergyBreakdown<T>,
    /// `entropy_alpha` or the ε analogue.
    pub entropy: T,
    pub el_residual: T,
    pub iterations: usize,
    pub stop: StopReason,
    /// Set when the stage did not reach the tolerance.
    pub warning: bool,
}

#[derive(Clone, Debug)]
pub struct StageResult<T> {
    pub summary: StageSummary<T>,
    pub field: MapField<T>,
    pub trace: RunTrace<T>,
}

/// Runs the stages in order, each warm-started from the previous result.
/// `hook` sees every finished stage (bubble diagnostics live there); its
/// errors abort the run.
pub fn continuation_run<T: Scalar>(
    u0: &MapField<T>,
    schedule: &ContinuationSchedule<T>,
    base: &OptimizerConfig<T>,
    mut hook: impl FnMut(&StageResult<T>) -> Result<()>,
) -> Result<Vec<StageResult<T>>> {
    let mut out: Vec<StageResult<T>> = Vec::with_capacity(schedule.stages.len());
    let mut u = u0.clone();
    for (k, spec) in schedule.stages.iter().enumerate() {
        let wrap = |e: Error| Error::Stage {
            stage: k,
            source: Box::new(e),
        };
        let f = schedule.functional(k).map_err(wrap)?;
        let cfg = spec.config.as_ref().unwrap_or(base);
        let trace = minimize_in_place(&mut u, &f, cfg).map_err(wrap)?;
        let energy = f.breakdown(&u);
        let summary = StageSummary {
            stage: k,
            kind: schedule.kind,
            parameter: spec.value,
            energy,
            entropy: energy.entropy,
            el_residual: el_residual(&u, &f),
            iterations: trace.iterations(),
            stop: trace.stop,
            warning: !trace.converged(),
        };
        let res = StageResult {
            summary,
            field: u.clone(),
            trace,
        };
        hook(&res).map_err(wrap)?;
        out.push(res);
    }
    Ok(out)
}

/// Concatenated traces with a leading stage column.
pub fn traces_table<T: Scalar>(stages: &[StageResult<T>]) -> Table {
    let mut t = Table::new(["stage", "iteration", "energy", "grad_norm", "step"]);
    for s in stages {
        for r in &s.trace.records {
            t.push(vec![
                s.summary.stage.to_string(),
                r.iteration.to_string(),
                float(r.energy),
                float(r.grad_norm),
                float(r.step),
            ]);
        }
    }
    t
}
