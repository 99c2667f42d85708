use crate::dispatcher::{CfaVns, DecisionStats, DispatcherConfig};
use crate::model::{CostBreakdown, Instance, Seconds};
use crate::par::{self, ExecMode};
use crate::sdp::{
    run_episode, solution_cost, verify_solution, Action, Dispatcher, EpisodeOptions, EpochRecord, RealizedRoute, SdpError, State,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::time::{Duration, Instant};

/// One point of the per-epoch series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub epoch: usize,
    pub time: Seconds,
    pub waiting_vehicles: usize,
    pub mean_committed_time: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DispatcherTotals {
    pub inserted: usize,
    pub scans: usize,
    pub accepted: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallClock {
    pub total_seconds: f64,
    pub mean_decision_seconds: f64,
    pub max_decision_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub instance: String,
    pub config_digest: String,
    /// True objective of the realized solution.
    pub score: f64,
    pub breakdown: CostBreakdown,
    pub orders: usize,
    pub epochs: usize,
    pub series: Vec<SeriesPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispatcher: Option<DispatcherTotals>,
    /// Only filled in when the search budget is wall-clock based, so that
    /// iteration-budget reports stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock: Option<WallClock>,
    pub routes: Vec<RealizedRoute>,
}

impl Report {
    pub fn digest(&self) -> String {
        digest_json(self)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    /// Re-checks the realized routes and recomputes the score from them.
    pub fn audit(&self, inst: &Instance) -> Result<f64, SdpError> {
        let problems = verify_solution(inst, &self.routes);
        if !problems.is_empty() {
            return Err(SdpError::InfeasibleSolution(problems));
        }
        Ok(solution_cost(inst, &self.routes)?.weighted_total)
    }
}

pub(crate) fn digest_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("value serializes");
    hex::encode(Sha256::digest(&bytes))
}

pub fn config_digest(config: &DispatcherConfig) -> String {
    digest_json(config)
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: Report,
    pub log: Vec<EpochRecord>,
    pub decisions: Vec<DecisionStats>,
}

struct Timed<'a> {
    inner: &'a mut dyn Dispatcher,
    durations: Vec<Duration>,
}

impl Dispatcher for Timed<'_> {
    fn decide(&mut self, inst: &Instance, state: &State) -> Result<Action, String> {
        let t = Instant::now();
        let a = self.inner.decide(inst, state);
        self.durations.push(t.elapsed());
        a
    }
}

/// Runs one episode with any dispatcher. `wall_clock` controls whether
/// timings go into the report.
pub fn run_with(
    inst: &Instance,
    dispatcher: &mut dyn Dispatcher,
    config_digest: String,
    options: EpisodeOptions,
    wall_clock: bool,
) -> Result<(Report, Vec<EpochRecord>), SdpError> {
    let started = Instant::now();
    let mut timed = Timed {
        inner: dispatcher,
        durations: Vec::new(),
    };
    let result = run_episode(inst, &mut timed, options)?;
    let series = result
        .log
        .iter()
        .map(|r| SeriesPoint {
            epoch: r.epoch,
            time: r.time,
            waiting_vehicles: r.waiting_vehicles,
            mean_committed_time: r.mean_committed_time,
        })
        .collect();
    let wall_clock = wall_clock.then(|| {
        let secs: Vec<f64> = timed.durations.iter().map(Duration::as_secs_f64).collect();
        WallClock {
            total_seconds: started.elapsed().as_secs_f64(),
            mean_decision_seconds: if secs.is_empty() { 0.0 } else { secs.iter().sum::<f64>() / secs.len() as f64 },
            max_decision_seconds: secs.iter().copied().fold(0.0, f64::max),
        }
    });
    let report = Report {
        instance: inst.name.clone(),
        config_digest,
        score: result.cost.weighted_total,
        breakdown: result.cost,
        orders: inst.orders.len(),
        epochs: result.epochs,
        series,
        dispatcher: None,
        wall_clock,
        routes: result.routes,
    };
    Ok((report, result.log))
}

/// Runs one episode with the CFA-VNS dispatcher.
pub fn run(inst: &Instance, config: &DispatcherConfig, options: EpisodeOptions) -> Result<RunOutput, SdpError> {
    let mut d = CfaVns::new(config.clone());
    let (mut report, log) = run_with(inst, &mut d, config_digest(config), options, config.uses_wall_clock())?;
    let mut totals = DispatcherTotals::default();
    for s in &d.stats {
        totals.inserted += s.inserted;
        totals.scans += s.scans;
        totals.accepted += s.accepted;
    }
    report.dispatcher = Some(totals);
    Ok(RunOutput {
        report,
        log,
        decisions: d.stats,
    })
}

/// Independent episodes, possibly in parallel. Results keep the cell order.
pub fn sweep(
    cells: &[(&Instance, DispatcherConfig)],
    options: EpisodeOptions,
    exec: ExecMode,
) -> Vec<Result<Report, SdpError>> {
    par::map(cells, exec, |(inst, cfg)| run(inst, cfg, options).map(|o| o.report))
}

/// The configs of a λ3 sweep: `fractions` of λ2, everything else from
/// `base` (or the instance).
pub fn lambda3_grid(inst: &Instance, base: &DispatcherConfig, fractions: &[f64]) -> Vec<DispatcherConfig> {
    fractions
        .iter()
        .map(|f| {
            let mut m = base.multipliers.unwrap_or(inst.params.multipliers);
            m.lambda3 = f * m.lambda2;
            DispatcherConfig {
                multipliers: Some(m),
                ..base.clone()
            }
        })
        .collect()
}

pub fn write_series_csv<W: std::io::Write>(out: W, series: &[SeriesPoint]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for p in series {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series_csv<R: std::io::Read>(input: R) -> Result<Vec<SeriesPoint>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}
