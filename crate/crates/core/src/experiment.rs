//! Experiment configs, the five presets and artifact emission.
//!
//! A config is a small TOML file: top-level `preset`, `seed` and `out`, plus
//! optional `[grid]`, `[target]`, `[schedule]`, `[optimizer]`, `[analysis]`,
//! `[initial]` and `[minmax]` sections. Every key is optional; missing ones
//! take the preset's defaults.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    annulus_profile, circle_balance, detect_bubble, detect_bubbles, energy_ledger, AnalysisConfig, BubbleRecord,
    EnergyLedger,
};
use crate::error::{Error, Result};
use crate::field::MapField;
use crate::functionals::Functional;
use crate::grid::DomainGrid;
use crate::maps;
use crate::minmax::{
    beta_table, entropy_derivative_check, sweepout_degree, BetaTable, DeformConfig, EntropyReport, PathFamily,
};
use crate::optimizer::{
    continuation_run, traces_table, BbRule, ContinuationSchedule, OptimizerConfig, ScheduleKind, StageSummary,
    StepMetric,
};
use crate::table::{float, Table};
use crate::target::TargetManifold;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    ConstantSanity,
    Degree1Torus,
    PlantedBubble,
    BiharmonicDegree1,
    GeodesicSweepout,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::ConstantSanity,
        Preset::Degree1Torus,
        Preset::PlantedBubble,
        Preset::BiharmonicDegree1,
        Preset::GeodesicSweepout,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::ConstantSanity => "constant-sanity",
            Preset::Degree1Torus => "degree1-torus",
            Preset::PlantedBubble => "planted-bubble",
            Preset::BiharmonicDegree1 => "biharmonic-degree1",
            Preset::GeodesicSweepout => "geodesic-sweepout",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown preset `{s}`")))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub lx: Option<f64>,
    pub ly: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    /// `n` in `S^n`.
    pub dim: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    /// α values for α presets, ε values for the biharmonic one, the α grid
    /// of the β table for the sweepout.
    pub values: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub armijo_c1: Option<f64>,
    pub backtrack: Option<f64>,
    pub step_min: Option<f64>,
    pub step_max: Option<f64>,
    pub initial_step: Option<f64>,
    pub max_backtracks: Option<usize>,
    pub bb_rule: Option<BbRule>,
    pub metric: Option<StepMetric>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub eps0: Option<f64>,
    pub delta: Option<f64>,
    pub big_r: Option<f64>,
    pub r0: Option<f64>,
    pub window_nodes: Option<usize>,
    pub radii_per_level: Option<usize>,
    pub max_bubbles: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// Bubble scale of the initial or planted map.
    pub rho: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinmaxSection {
    pub members: Option<usize>,
    pub restarts: Option<usize>,
    pub amplitude: Option<f64>,
    pub step: Option<f64>,
    pub band_fraction: Option<f64>,
    pub max_sweeps: Option<usize>,
    pub max_gap: Option<f64>,
    pub max_members: Option<usize>,
}

/// The config file as written.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub target: TargetSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub minmax: MinmaxSection,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            Error::Config {
                line,
                message: e.message().to_owned(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn for_preset(preset: Preset) -> Self {
        ExperimentConfig {
            preset: Some(preset),
            ..Self::default()
        }
    }

    /// Fills every missing value from the preset defaults and validates.
    pub fn resolve(&self) -> Result<Experiment> {
        let preset = self
            .preset
            .ok_or_else(|| Error::InvalidParameter("no preset given".into()))?;
        let d = Defaults::of(preset);
        let g = &self.grid;
        let grid = if preset == Preset::GeodesicSweepout {
            if g.ny.is_some() || g.ly.is_some() {
                return Err(Error::InvalidParameter(
                    "the sweepout lives on a circle; drop ny and ly".into(),
                ));
            }
            DomainGrid::circle(g.nx.unwrap_or(d.nx), g.lx.unwrap_or(std::f64::consts::TAU))?
        } else {
            let nx = g.nx.unwrap_or(d.nx);
            DomainGrid::torus(nx, g.ny.unwrap_or(nx), g.lx.unwrap_or(1.0), g.ly.unwrap_or(1.0))?
        };
        let dim = self.target.dim.unwrap_or(2);
        if dim != 2 && preset != Preset::ConstantSanity {
            return Err(Error::InvalidParameter(format!(
                "preset {} needs the target S^2, got S^{dim}",
                preset.name()
            )));
        }
        let target = TargetManifold::sphere(dim)?;

        let o = &self.optimizer;
        let base = OptimizerConfig::<f64>::default();
        let optimizer = OptimizerConfig {
            tolerance: o.tolerance.unwrap_or(d.tolerance),
            max_iterations: o.max_iterations.unwrap_or(base.max_iterations),
            armijo_c1: o.armijo_c1.unwrap_or(base.armijo_c1),
            backtrack: o.backtrack.unwrap_or(base.backtrack),
            step_min: o.step_min.unwrap_or(base.step_min),
            step_max: o.step_max.unwrap_or(base.step_max),
            initial_step: o.initial_step.unwrap_or(d.initial_step),
            max_backtracks: o.max_backtracks.unwrap_or(base.max_backtracks),
            bb_rule: o.bb_rule.unwrap_or(base.bb_rule),
            metric: o.metric.unwrap_or(d.metric),
        };
        optimizer.validate()?;

        let a = &self.analysis;
        let analysis = AnalysisConfig {
            eps0: a.eps0.unwrap_or(d.analysis.eps0),
            delta: a.delta.unwrap_or(d.analysis.delta),
            big_r: a.big_r.unwrap_or(d.analysis.big_r),
            r0: a.r0.unwrap_or(d.analysis.r0),
            window_nodes: a.window_nodes.unwrap_or(d.analysis.window_nodes),
            radii_per_level: a.radii_per_level.unwrap_or(d.analysis.radii_per_level),
        };
        if preset != Preset::GeodesicSweepout {
            analysis.validate(&grid)?;
        }
        let max_bubbles = a.max_bubbles.unwrap_or(1);

        let m = &self.minmax;
        let dd = DeformConfig::<f64>::default();
        let deform = DeformConfig {
            step: m.step.unwrap_or(dd.step),
            band_fraction: m.band_fraction.unwrap_or(dd.band_fraction),
            max_sweeps: m.max_sweeps.unwrap_or(dd.max_sweeps),
            min_decrease: dd.min_decrease,
            max_halvings: dd.max_halvings,
            max_gap: m.max_gap.unwrap_or(dd.max_gap),
            max_members: m.max_members.unwrap_or(dd.max_members),
        };
        let minmax = MinmaxSettings {
            members: m.members.unwrap_or(64),
            restarts: m.restarts.unwrap_or(3),
            amplitude: m.amplitude.unwrap_or(0.05),
            deform,
        };
        if minmax.members < 2 || minmax.restarts == 0 || !(minmax.deform.step > 0.0) {
            return Err(Error::InvalidParameter(
                "minmax needs >= 2 members, >= 1 restart and a positive step".into(),
            ));
        }

        let rho = self.initial.rho.unwrap_or(d.rho);
        if !(rho > 0.0) {
            return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
        }
        let schedule = self.schedule.values.clone().unwrap_or(d.schedule);
        match preset {
            Preset::BiharmonicDegree1 => drop(ContinuationSchedule::epsilon(&schedule)?),
            Preset::GeodesicSweepout => {
                if schedule.len() < 4 || schedule.windows(2).any(|w| !(w[1] > w[0])) || !(schedule[0] > 1.0) {
                    return Err(Error::InvalidParameter(
                        "the beta table needs >= 4 strictly increasing alphas above 1".into(),
                    ));
                }
            }
            _ => drop(ContinuationSchedule::alpha(&schedule)?),
        }
        Ok(Experiment {
            preset,
            seed: self.seed.unwrap_or(0),
            grid,
            target,
            schedule,
            optimizer,
            analysis,
            max_bubbles,
            rho,
            minmax,
        })
    }
}

struct Defaults {
    nx: usize,
    schedule: Vec<f64>,
    rho: f64,
    initial_step: f64,
    tolerance: f64,
    metric: StepMetric,
    analysis: AnalysisConfig<f64>,
}

impl Defaults {
    fn of(p: Preset) -> Self {
        let analysis = AnalysisConfig::default();
        match p {
            Preset::ConstantSanity => Defaults {
                nx: 32,
                schedule: vec![1.1],
                rho: 0.05,
                initial_step: 1e-2,
                tolerance: 1e-8,
                metric: StepMetric::Nodal,
                analysis,
            },
            Preset::Degree1Torus => Defaults {
                nx: 256,
                schedule: vec![1.2, 1.1, 1.05, 1.02, 1.01],
                rho: 0.05,
                initial_step: 1.0,
                tolerance: 1e-8,
                metric: StepMetric::Sobolev,
                analysis: AnalysisConfig {
                    eps0: 16.0,
                    big_r: 8.0,
                    ..analysis
                },
            },
            Preset::PlantedBubble => Defaults {
                nx: 512,
                schedule: vec![1.01],
                rho: 0.02,
                initial_step: 1e-2,
                tolerance: 1e-8,
                metric: StepMetric::Nodal,
                analysis: AnalysisConfig {
                    eps0: 16.0,
                    big_r: 10.0,
                    ..analysis
                },
            },
            Preset::BiharmonicDegree1 => Defaults {
                nx: 256,
                schedule: vec![1e-2, 1e-3, 1e-4, 1e-5],
                rho: 0.2,
                initial_step: 1.0,
                // the ε Δ² stencil amplifies rounding to about 6e-7 at ε = 1e-2
                tolerance: 1e-6,
                metric: StepMetric::Sobolev,
                analysis: AnalysisConfig {
                    eps0: 8.0,
                    big_r: 10.0,
                    ..analysis
                },
            },
            Preset::GeodesicSweepout => Defaults {
                nx: 128,
                schedule: vec![1.01, 1.02, 1.03, 1.05, 1.1, 1.15, 1.2, 1.3],
                rho: 0.05,
                initial_step: 1e-2,
                tolerance: 1e-8,
                metric: StepMetric::Nodal,
                analysis,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinmaxSettings {
    pub members: usize,
    pub restarts: usize,
    /// Size of the seeded perturbation applied to every restart but the first.
    pub amplitude: f64,
    pub deform: DeformConfig<f64>,
}

/// A fully resolved, validated experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Experiment {
    pub preset: Preset,
    pub seed: u64,
    pub grid: DomainGrid<f64>,
    pub target: TargetManifold,
    pub schedule: Vec<f64>,
    pub optimizer: OptimizerConfig<f64>,
    pub analysis: AnalysisConfig<f64>,
    pub max_bubbles: usize,
    pub rho: f64,
    pub minmax: MinmaxSettings,
}

/// One continuation stage with the bubbles found in it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub summary: StageSummary<f64>,
    pub bubbles: Vec<BubbleRecord<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StagesFile {
    pub preset: Preset,
    pub stages: Vec<StageRecord>,
    /// Error that ended the run early, if any.
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinmaxFile {
    pub table: BetaTable<f64>,
    pub report: EntropyReport<f64>,
    /// Sweepout degree of every restart family before deformation.
    pub degrees: Vec<f64>,
    pub volume: f64,
}

/// How a run ended. `Partial` means some stages finished and were written
/// before a stage failed.
#[derive(Debug)]
pub enum Outcome {
    Complete,
    Partial(Error),
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Complete => 0,
            Outcome::Partial(_) => 2,
        }
    }
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let f = fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), value)?;
    Ok(())
}

pub fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D> {
    let f = fs::File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
}

impl Experiment {
    pub fn run(&self, out: &Path) -> Result<Outcome> {
        fs::create_dir_all(out)?;
        write_json(&out.join("config.json"), self)?;
        match self.preset {
            Preset::ConstantSanity | Preset::Degree1Torus | Preset::BiharmonicDegree1 => self.run_continuation(out),
            Preset::PlantedBubble => self.run_planted(out),
            Preset::GeodesicSweepout => self.run_minmax(out).map(|_| Outcome::Complete),
        }
    }

    fn initial_field(&self) -> Result<MapField<f64>> {
        match self.preset {
            Preset::ConstantSanity => {
                let mut p = vec![0.0; self.target.m()];
                p[self.target.m() - 1] = 1.0;
                MapField::constant(self.grid.clone(), self.target, &p)
            }
            _ => maps::degree_one_initializer(&self.grid, self.rho),
        }
    }

    fn schedule(&self) -> Result<ContinuationSchedule<f64>> {
        match self.preset {
            Preset::BiharmonicDegree1 => ContinuationSchedule::epsilon(&self.schedule),
            _ => ContinuationSchedule::alpha(&self.schedule),
        }
    }

    fn run_continuation(&self, out: &Path) -> Result<Outcome> {
        let schedule = self.schedule()?;
        let u0 = self.initial_field()?;
        let mut records: Vec<StageRecord> = Vec::new();
        let mut last: Option<(MapField<f64>, Functional<f64>)> = None;
        let mut traces = Vec::new();
        let result = continuation_run(&u0, &schedule, &self.optimizer, |stage| {
            let f = schedule.functional(stage.summary.stage)?;
            let mut bubbles = detect_bubbles(&stage.field, &self.analysis, self.max_bubbles)?;
            for b in &mut bubbles {
                b.annotate(&f);
            }
            records.push(StageRecord {
                summary: stage.summary.clone(),
                bubbles,
            });
            traces.push(stage.clone());
            last = Some((stage.field.clone(), f));
            Ok(())
        });
        let failure = result.err();
        write_json(
            &out.join("stages.json"),
            &StagesFile {
                preset: self.preset,
                stages: records.clone(),
                failure: failure.as_ref().map(|e| e.to_string()),
            },
        )?;
        stages_table(&records).save(&out.join("stages.csv"))?;
        traces_table(&traces).save(&out.join("trace.csv"))?;
        if let Some((u, f)) = &last {
            u.save(&out.join("field.bin"))?;
            let bubbles = &records.last().expect("a stage finished").bubbles;
            analyze_into(u, f, bubbles, &self.analysis, out)?;
        }
        match failure {
            None => Ok(Outcome::Complete),
            Some(e) if !records.is_empty() => Ok(Outcome::Partial(e)),
            Some(e) => Err(e),
        }
    }

    fn run_planted(&self, out: &Path) -> Result<Outcome> {
        let u = maps::planted_bubble(&self.grid, self.grid.center(), self.rho)?;
        let f = Functional::alpha(*self.schedule.first().unwrap_or(&1.0))?;
        let mut bubble =
            detect_bubble(&u, &self.analysis)?.ok_or_else(|| Error::Invariant("planted bubble not detected".into()))?;
        bubble.annotate(&f);
        write_json(&out.join("bubble.json"), &bubble)?;
        let mut t = Table::new(["r", "radial", "tangential", "imbalance"]);
        for k in 0..=16 {
            let r = self.rho * (2.0 + 8.0 * k as f64 / 16.0);
            if r > self.grid.max_radius() {
                break;
            }
            let c = circle_balance(&u, bubble.center, r)?;
            t.push(vec![
                float(r),
                float(c.radial),
                float(c.tangential),
                float(c.imbalance()),
            ]);
        }
        t.save(&out.join("hopf.csv"))?;
        u.save(&out.join("field.bin"))?;
        analyze_into(&u, &f, std::slice::from_ref(&bubble), &self.analysis, out)?;
        Ok(Outcome::Complete)
    }

    fn run_minmax(&self, out: &Path) -> Result<MinmaxFile> {
        let base = PathFamily::latitude_sweepout(&self.grid, self.minmax.members)?;
        let seed = self.seed;
        let amp = self.minmax.amplitude;
        let generator = |r: usize| {
            if r == 0 {
                Ok(base.clone())
            } else {
                base.perturbed(amp, seed.wrapping_add(r as u64))
            }
        };
        let table = beta_table(&generator, &self.schedule, self.minmax.restarts, &self.minmax.deform)?;
        let report = entropy_derivative_check(&table)?;
        let degrees = (0..self.minmax.restarts)
            .map(|r| generator(r).and_then(|f| sweepout_degree(&f)))
            .collect::<Result<Vec<_>>>()?;
        table.to_table().save(&out.join("beta.csv"))?;
        let file = MinmaxFile {
            table,
            report,
            degrees,
            volume: self.grid.volume(),
        };
        write_json(&out.join("minmax.json"), &file)?;
        Ok(file)
    }
}

/// Bubble analysis of a stored field: `ledger.json` and, when a bubble is
/// present, `bubbles.json` and `neck.csv` (profile from `R r_k` to `R0`
/// around the first bubble).
pub fn analyze_into(
    u: &MapField<f64>,
    functional: &Functional<f64>,
    bubbles: &[BubbleRecord<f64>],
    cfg: &AnalysisConfig<f64>,
    out: &Path,
) -> Result<EnergyLedger<f64>> {
    fs::create_dir_all(out)?;
    let ledger = energy_ledger(u, functional, bubbles, cfg)?;
    write_json(&out.join("ledger.json"), &ledger)?;
    if let Some(b) = bubbles.first() {
        write_json(&out.join("bubbles.json"), &bubbles)?;
        let r1 = cfg.big_r * b.radius;
        if r1 < cfg.r0 {
            annulus_profile(u, b.center, r1, cfg.r0, cfg.radii_per_level)?
                .to_table()
                .save(&out.join("neck.csv"))?;
        }
    }
    Ok(ledger)
}

/// Detects bubbles on `u` and writes the analysis artifacts.
pub fn analyze(
    u: &MapField<f64>,
    functional: &Functional<f64>,
    cfg: &AnalysisConfig<f64>,
    max_bubbles: usize,
    out: &Path,
) -> Result<(Vec<BubbleRecord<f64>>, EnergyLedger<f64>)> {
    let mut bubbles = detect_bubbles(u, cfg, max_bubbles)?;
    for b in &mut bubbles {
        b.annotate(functional);
    }
    let ledger = analyze_into(u, functional, &bubbles, cfg, out)?;
    Ok((bubbles, ledger))
}

/// Per-stage summary with the leading bubble's radius, exponent and ε ratio.
pub fn stages_table(records: &[StageRecord]) -> Table {
    let mut t = Table::new([
        "stage",
        "kind",
        "parameter",
        "energy",
        "dirichlet",
        "entropy",
        "el_residual",
        "iterations",
        "stop",
        "radius",
        "exponent",
        "eps_ratio",
    ]);
    for r in records {
        let s = &r.summary;
        let b = r.bubbles.first();
        let opt = |v: Option<f64>| v.map(float).unwrap_or_default();
        t.push(vec![
            s.stage.to_string(),
            match s.kind {
                ScheduleKind::Alpha => "alpha".into(),
                ScheduleKind::Epsilon => "epsilon".into(),
            },
            float(s.parameter),
            float(s.energy.total),
            float(s.energy.dirichlet),
            float(s.entropy),
            float(s.el_residual),
            s.iterations.to_string(),
            serde_json::to_value(s.stop)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default(),
            opt(b.map(|b| b.radius)),
            opt(b.map(|b| b.exponent)),
            opt(b.and_then(|b| b.eps_ratio)),
        ]);
    }
    t
}
