use crate::args::*;
use crate::error::CliError;
use crate::output::{tau_tag, Cell, OutputDir};
use crate::synth;
use serde::Deserialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use windcond::bootstrap::{bootstrap_statistic, make_block_plan, Estimator};
use windcond::circular::{met_grid, PeriodicSplineBasis};
use windcond::ingest::{
    adjust_height, aggregate, diurnal_profile, directional_pairs, filter_season, read_csv_multi, windrose_table,
    write_csv, CsvSchema, DirectionUnit, IngestReport, SpeedUnit, WindSeries,
};
use windcond::ivstats::{
    classify_robustness, iv_report, yearly_pcc, EnsembleSeries, IVReport, PCCReport, PccSummaryRow, SdCentering,
    Statistic,
};
use windcond::quantreg::{fit_quantile_curves, select_df_elbow};
use windcond::vonmises::{fit_vm_mixture_em, EmConfig, MixtureSummary};
use windcond::weibull::{bin_directional, fit_weibull_harmonic, quantile_table, BinningConfig};
use windcond::ErrorKind;

/// Keeps the library error's classification but names the file.
fn in_file(path: &Path, e: impl Into<windcond::Error>) -> CliError {
    let e: windcond::Error = e.into();
    let msg = format!("{}: {e}", path.display());
    match e.kind() {
        ErrorKind::Config => CliError::Config(msg),
        ErrorKind::Data => CliError::Data(msg),
        ErrorKind::Numerical => CliError::Numerical(msg),
    }
}

fn schema(ing: &IngestArgs) -> CsvSchema {
    CsvSchema {
        speed_unit: match ing.speed_unit {
            SpeedUnitArg::Ms => SpeedUnit::MetersPerSecond,
            SpeedUnitArg::Knots => SpeedUnit::Knots,
            SpeedUnitArg::Mph => SpeedUnit::MilesPerHour,
            SpeedUnitArg::Kmh => SpeedUnit::KilometersPerHour,
        },
        direction_unit: match ing.direction_unit {
            DirectionUnitArg::MetDeg => DirectionUnit::MetDegrees,
            DirectionUnitArg::Radians => DirectionUnit::Radians,
        },
        calm_threshold: ing.calm,
        ..CsvSchema::default()
    }
}

struct Loaded {
    series: Vec<WindSeries>,
    reports: Vec<(PathBuf, IngestReport)>,
}

impl Loaded {
    fn report_json(&self) -> Value {
        Value::Array(
            self.reports
                .iter()
                .map(|(p, r)| {
                    json!({
                        "path": p.display().to_string(),
                        "rows": r.rows,
                        "accepted": r.accepted,
                        "calm": r.calm,
                        "rejected": r.rejected.len(),
                    })
                })
                .collect(),
        )
    }
}

fn load(paths: &[PathBuf], ing: &IngestArgs) -> Result<Loaded, CliError> {
    if !(ing.calm >= 0.0 && ing.calm.is_finite()) {
        return Err(CliError::Config(format!("calm threshold {} must be finite and >= 0", ing.calm)));
    }
    let schema = schema(ing);
    let mut series: Vec<WindSeries> = Vec::new();
    let mut reports = Vec::new();
    for p in paths {
        let f = File::open(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
        let (found, report) = read_csv_multi(BufReader::new(f), &schema).map_err(|e| in_file(p, e))?;
        reports.push((p.clone(), report));
        for mut s in found {
            if let Some(minutes) = ing.aggregate_minutes {
                if minutes <= 0 {
                    return Err(CliError::Config(format!("--aggregate-minutes {minutes} must be positive")));
                }
                s = aggregate(&s, chrono::Duration::minutes(minutes)).map_err(|e| in_file(p, e))?;
            }
            if let Some(h) = ing.target_height {
                s = adjust_height(&s, h, ing.shear_exponent).map_err(|e| in_file(p, e))?;
            }
            if series.iter().any(|o| o.location == s.location && o.member == s.member) {
                return Err(CliError::Data(format!(
                    "{}: series for location `{}` member `{}` already read from another file",
                    p.display(),
                    s.location,
                    s.member.as_deref().unwrap_or("-")
                )));
            }
            series.push(s);
        }
    }
    Ok(Loaded { series, reports })
}

fn matches(s: &WindSeries, location: Option<&str>, member: Option<&str>) -> bool {
    location.map_or(true, |l| s.location == l) && member.map_or(true, |m| s.member.as_deref() == Some(m))
}

fn select_one(series: &[WindSeries], input: &InputArgs) -> Result<WindSeries, CliError> {
    let hits: Vec<&WindSeries> =
        series.iter().filter(|s| matches(s, input.location.as_deref(), input.member.as_deref())).collect();
    match hits.len() {
        0 => Err(CliError::Data("no series matches the --location/--member selection".into())),
        1 => Ok(hits[0].clone()),
        n => Err(CliError::Config(format!(
            "{n} series match; choose one with --location and --member ({})",
            hits.iter().map(|s| series_label(s)).collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn series_label(s: &WindSeries) -> String {
    match &s.member {
        Some(m) => format!("{}/{}", s.location, m),
        None => s.location.clone(),
    }
}

fn finish(out: OutputDir, command: &str, config: &impl serde::Serialize, inputs: &[PathBuf]) -> Result<Value, CliError> {
    let dir = out.path().display().to_string();
    let config = serde_json::to_value(config).expect("arguments serialize");
    let files = out.finish(command, config, inputs)?;
    Ok(json!({ "command": command, "out": dir, "files": files }))
}

pub fn fit_direction(a: &FitDirectionArgs) -> Result<Value, CliError> {
    let loaded = load(&a.input.inputs, &a.ingest)?;
    let s = select_one(&loaded.series, &a.input)?;
    let seasonal = filter_season(&s, a.season);
    let (dirs, _) = directional_pairs(&seasonal.series.observations(), a.ingest.calm);
    let em = EmConfig { max_iter: a.max_iter, tol: a.tol, restarts: a.restarts, seed: a.seed, ..EmConfig::default() };
    let fit = fit_vm_mixture_em(&dirs, a.components, &em)?;
    let summary = MixtureSummary::new(&fit, dirs.len());
    let mut out = OutputDir::create(&a.output.out, a.output.full_precision)?;
    out.write_json(
        "mixture.json",
        &json!({
            "location": s.location,
            "member": s.member,
            "season": a.season,
            "n": summary.n,
            "weights": summary.weights,
            "mu_deg": summary.mu_deg,
            "kappa": summary.kappa,
            "loglik": summary.loglik,
            "converged": summary.converged,
            "iterations": fit.iterations,
            "best_run": fit.best_run,
            "collapsed_runs": fit.collapsed_runs,
            "ingest": loaded.report_json(),
        }),
    )?;
    let rows: Vec<Vec<Cell>> =
        met_grid(360).into_iter().map(|(d, x)| vec![d.into(), fit.mixture.density(x).into()]).collect();
    out.write_csv("density.csv", &["direction_deg", "density"], &rows)?;
    finish(out, "fit-direction", a, &a.input.inputs)
}

fn check_taus(taus: &[f64]) -> Result<(), CliError> {
    if taus.is_empty() {
        return Err(CliError::Config("at least one quantile level is needed".into()));
    }
    let mut sorted = taus.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::Config("quantile levels must be distinct".into()));
    }
    Ok(())
}

const QUANTILE_HEADER: [&str; 4] = ["direction_deg", "tau", "quantile", "method"];

pub fn fit_speed(a: &FitSpeedArgs) -> Result<Value, CliError> {
    check_taus(&a.taus)?;
    let loaded = load(&a.input.inputs, &a.ingest)?;
    let s = select_one(&loaded.series, &a.input)?;
    let seasonal = filter_season(&s, a.season);
    let obs = seasonal.series.observations();
    let mut out = OutputDir::create(&a.output.out, a.output.full_precision)?;
    let head = json!({
        "location": s.location,
        "member": s.member,
        "season": a.season,
        "ingest": loaded.report_json(),
    });
    let mut model = match a.method {
        SpeedMethod::Qr => {
            let (df, elbow) = match &a.select_df {
                Some(cands) => {
                    let sel = select_df_elbow(&obs, a.elbow_tau, cands)?;
                    let rows: Vec<Vec<Cell>> = sel
                        .table
                        .iter()
                        .map(|r| vec![r.df.into(), r.mae.into(), r.distance.into(), (r.df == sel.chosen_df).into()])
                        .collect();
                    out.write_csv("elbow.csv", &["df", "mae", "distance", "chosen"], &rows)?;
                    (sel.chosen_df, Some(json!({ "tau": a.elbow_tau, "chosen_df": sel.chosen_df, "table": sel.table })))
                }
                None => (a.model.df, None),
            };
            let basis = PeriodicSplineBasis::uniform(df, a.model.degree)?;
            let set = fit_quantile_curves(&obs, &a.taus, &basis)?;
            for c in &set.curves {
                let rows: Vec<Vec<Cell>> =
                    c.table().into_iter().map(|(d, q)| vec![d.into(), c.tau.into(), q.into(), "qr".into()]).collect();
                out.write_csv(&format!("quantile_{}.csv", tau_tag(c.tau)), &QUANTILE_HEADER, &rows)?;
            }
            json!({
                "method": "qr",
                "n": set.curves[0].n,
                "curves": set.curves.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
                "crossings": set.crossings,
                "elbow": elbow,
            })
        }
        SpeedMethod::Weibull => {
            let cfg = BinningConfig { n_bins: a.model.bins, min_count: a.model.min_count, calm_threshold: a.ingest.calm };
            let binned = bin_directional(&obs, &cfg)?;
            let m = fit_weibull_harmonic(&binned, a.model.harmonics)?;
            let table = quantile_table(&m, &a.taus)?;
            for (k, &tau) in a.taus.iter().enumerate() {
                let rows: Vec<Vec<Cell>> =
                    table.iter().map(|(d, qs)| vec![(*d).into(), tau.into(), qs[k].into(), "weibull".into()]).collect();
                out.write_csv(&format!("quantile_{}.csv", tau_tag(tau)), &QUANTILE_HEADER, &rows)?;
            }
            let n: usize = binned.bins.iter().map(|b| b.count).sum();
            json!({ "method": "weibull", "n": n, "taus": a.taus, "model": m.to_json() })
        }
    };
    merge(&mut model, head);
    out.write_json("speed_model.json", &model)?;
    finish(out, "fit-speed", a, &a.input.inputs)
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        for (k, v) in b {
            a.insert(k, v);
        }
    }
}

pub fn bootstrap(a: &BootstrapArgs) -> Result<Value, CliError> {
    let loaded = load(&a.input.inputs, &a.ingest)?;
    let s = select_one(&loaded.series, &a.input)?;
    let seasonal = filter_season(&s, a.season);
    let plan = make_block_plan(&seasonal, a.replicates, a.seed)?;
    let est = match a.statistic {
        BootStatistic::VmDensity => Estimator::VmDensity { components: a.components, em: EmConfig::with_seed(a.seed) },
        BootStatistic::WeibullQuantile => Estimator::WeibullQuantile {
            tau: a.tau,
            binning: BinningConfig { n_bins: a.model.bins, min_count: a.model.min_count, calm_threshold: a.ingest.calm },
            harmonics: a.model.harmonics,
        },
        BootStatistic::QrQuantile => {
            Estimator::QrQuantile { tau: a.tau, basis: PeriodicSplineBasis::uniform(a.model.df, a.model.degree)? }
        }
        BootStatistic::Mean => Estimator::Mean,
        BootStatistic::Sd => Estimator::Sd,
        BootStatistic::Q95 => Estimator::Q95,
    };
    let band = bootstrap_statistic(&plan, &seasonal, &est, a.alpha)?;
    let mut out = OutputDir::create(&a.output.out, a.output.full_precision)?;
    let mut j = band.to_json();
    merge(
        &mut j,
        json!({
            "location": s.location,
            "member": s.member,
            "season": a.season,
            "seed": a.seed,
            "years": plan.years,
            "point_outside": band.point_outside,
        }),
    );
    out.write_json("band.json", &j)?;
    match &band.grid_deg {
        Some(grid) => {
            let rows: Vec<Vec<Cell>> = grid
                .iter()
                .enumerate()
                .map(|(k, &d)| vec![d.into(), band.lower[k].into(), band.point[k].into(), band.upper[k].into()])
                .collect();
            out.write_csv("band.csv", &["direction_deg", "lower", "point", "upper"], &rows)?;
        }
        None => {
            let row = vec![
                band.statistic.clone().into(),
                band.lower[0].into(),
                band.point[0].into(),
                band.upper[0].into(),
            ];
            out.write_csv("band.csv", &["statistic", "lower", "point", "upper"], &[row])?;
        }
    }
    finish(out, "bootstrap", a, &a.input.inputs)
}

fn centering(c: Centering) -> SdCentering {
    match c {
        Centering::Member => SdCentering::MemberMean,
        Centering::Ensemble => SdCentering::EnsembleMean,
    }
}

fn by_location(series: Vec<WindSeries>, location: Option<&str>) -> BTreeMap<String, Vec<WindSeries>> {
    let mut groups: BTreeMap<String, Vec<WindSeries>> = BTreeMap::new();
    for s in series.into_iter().filter(|s| matches(s, location, None)) {
        groups.entry(s.location.clone()).or_default().push(s);
    }
    for g in groups.values_mut() {
        g.sort_by(|a, b| a.member.cmp(&b.member));
    }
    groups
}

fn iv_reports(
    series: Vec<WindSeries>,
    location: Option<&str>,
    season: windcond::ingest::Season,
    c: Centering,
) -> Result<Vec<IVReport>, CliError> {
    let groups = by_location(series, location);
    if groups.is_empty() {
        return Err(CliError::Data("no ensemble members match the selection".into()));
    }
    groups
        .into_values()
        .map(|members| {
            let ens = EnsembleSeries::new(members)?;
            Ok(iv_report(&ens, season, centering(c))?)
        })
        .collect()
}

pub fn iv(a: &IvArgs) -> Result<Value, CliError> {
    let loaded = load(&a.inputs, &a.ingest)?;
    let reports = iv_reports(loaded.series, a.location.as_deref(), a.season, a.sd_centering)?;
    let mut out = OutputDir::create(&a.output.out, a.output.full_precision)?;
    out.write_json("iv.json", &json!({ "reports": reports }))?;
    let rows: Vec<Vec<Cell>> = reports
        .iter()
        .map(|r| {
            vec![
                r.location.clone().into(),
                r.season.to_string().into(),
                r.iv_mean.into(),
                r.iv_sd.into(),
                r.iv_q95.into(),
                r.members.into(),
                r.timestamps.into(),
            ]
        })
        .collect();
    out.write_csv("iv.csv", &["location", "season", "iv_mean", "iv_sd", "iv_q95", "members", "timestamps"], &rows)?;
    finish(out, "iv", a, &a.inputs)
}

#[derive(Deserialize)]
struct IvFile {
    reports: Vec<IVReport>,
}

fn statistic(s: StatisticArg) -> Statistic {
    match s {
        StatisticArg::Mean => Statistic::Mean,
        StatisticArg::Sd => Statistic::Sd,
        StatisticArg::Q95 => Statistic::Q95,
    }
}

fn pick_member<'a>(group: &'a [WindSeries], member: Option<&str>) -> Option<&'a WindSeries> {
    match member {
        Some(m) => group.iter().find(|s| s.member.as_deref() == Some(m)),
        None => group.first(),
    }
}

pub fn pcc(a: &PccArgs) -> Result<Value, CliError> {
    let stat = statistic(a.statistic);
    let hist = load(&a.hist, &a.ingest)?;
    let fut = load(&a.fut, &a.ingest)?;
    let ivs: Vec<IVReport> = match &a.iv {
        Some(p) => {
            let f = File::open(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            let parsed: IvFile = serde_json::from_reader(BufReader::new(f))
                .map_err(|e| CliError::Data(format!("{}: not an iv.json file: {e}", p.display())))?;
            parsed.reports
        }
        None => iv_reports(load(&a.ensemble, &a.ingest)?.series, a.location.as_deref(), a.season, a.sd_centering)?,
    };
    let hist_groups = by_location(hist.series, a.location.as_deref());
    let fut_groups = by_location(fut.series, a.location.as_deref());
    if hist_groups.is_empty() {
        return Err(CliError::Data("no historical series match the selection".into()));
    }
    let mut reports: Vec<PCCReport> = Vec::new();
    let mut members = Vec::new();
    for (loc, group) in &hist_groups {
        let h = pick_member(group, a.member.as_deref())
            .ok_or_else(|| CliError::Data(format!("location `{loc}` has no historical member {:?}", a.member)))?;
        let f = fut_groups
            .get(loc)
            .and_then(|g| g.iter().find(|s| s.member == h.member))
            .ok_or_else(|| CliError::Data(format!("no future series for `{}`", series_label(h))))?;
        let iv = ivs
            .iter()
            .find(|r| &r.location == loc && r.season == a.season)
            .ok_or_else(|| CliError::Data(format!("no internal variability for `{loc}` in {}", a.season)))?;
        let change = yearly_pcc(h, f, a.season, stat)?;
        reports.push(classify_robustness(&change, iv)?);
        members.push(h.member.clone());
    }
    let mut out = OutputDir::create(&a.output.out, a.output.full_precision)?;
    let json_reports: Vec<Value> = reports
        .iter()
        .zip(&members)
        .map(|(r, m)| {
            let mut v = serde_json::to_value(r).expect("serializes");
            merge(&mut v, json!({ "member": m }));
            v
        })
        .collect();
    out.write_json("pcc.json", &json!({ "reports": json_reports }))?;
    let summary: Vec<Vec<Cell>> = reports
        .iter()
        .filter_map(PccSummaryRow::from_report)
        .map(|r| {
            vec![
                r.location.into(),
                r.season.to_string().into(),
                r.statistic.to_string().into(),
                r.diff_min.into(),
                r.diff_q1.into(),
                r.diff_median.into(),
                r.diff_q3.into(),
                r.diff_max.into(),
                r.median_hist.into(),
                r.median_fut.into(),
                r.iv.into(),
                r.hist_lower.into(),
                r.hist_upper.into(),
                r.fut_lower.into(),
                r.fut_upper.into(),
                r.robust.into(),
            ]
        })
        .collect();
    out.write_csv("pcc_summary.csv", &PCC_SUMMARY_HEADER, &summary)?;
    let mut diffs = Vec::new();
    for r in &reports {
        for (i, hy) in r.hist_years.iter().enumerate() {
            for (j, fy) in r.fut_years.iter().enumerate() {
                diffs.push(vec![
                    r.location.clone().into(),
                    (*hy).into(),
                    (*fy).into(),
                    r.differences[i * r.fut_years.len() + j].into(),
                ]);
            }
        }
    }
    out.write_csv("pcc_differences.csv", &["location", "hist_year", "fut_year", "difference"], &diffs)?;
    let mut inputs = a.hist.clone();
    inputs.extend(a.fut.iter().cloned());
    inputs.extend(a.iv.iter().cloned());
    inputs.extend(a.ensemble.iter().cloned());
    finish(out, "pcc", a, &inputs)
}

pub const PCC_SUMMARY_HEADER: [&str; 16] = [
    "location",
    "season",
    "statistic",
    "diff_min",
    "diff_q1",
    "diff_median",
    "diff_q3",
    "diff_max",
    "median_hist",
    "median_fut",
    "iv",
    "hist_lower",
    "hist_upper",
    "fut_lower",
    "fut_upper",
    "robust",
];

pub fn summarize(a: &SummarizeArgs) -> Result<Value, CliError> {
    if a.sectors == 0 {
        return Err(CliError::Config("--sectors must be positive".into()));
    }
    let loaded = load(&a.input.inputs, &a.ingest)?;
    let chosen: Vec<&WindSeries> = loaded
        .series
        .iter()
        .filter(|s| matches(s, a.input.location.as_deref(), a.input.member.as_deref()))
        .collect();
    if chosen.is_empty() {
        return Err(CliError::Data("no series matches the --location/--member selection".into()));
    }
    let mut diurnal_rows = Vec::new();
    let mut rose_rows = Vec::new();
    let mut entries = Vec::new();
    for s in chosen {
        let s = match a.season {
            Some(season) => filter_season(s, season).series,
            None => s.clone(),
        };
        let member = s.member.clone().unwrap_or_default();
        let profile = diurnal_profile(&s, a.utc_offset);
        for h in &profile.hours {
            diurnal_rows.push(vec![s.location.clone().into(), member.clone().into(), h.hour.into(), h.mean.into(), h.count.into()]);
        }
        let rose = windrose_table(&s, a.sectors, &a.speed_edges)?;
        for (k, centre) in rose.sector_centers_deg.iter().enumerate() {
            for (c, f) in rose.frequency[k].iter().enumerate() {
                let lower = if c == 0 { 0.0 } else { rose.speed_edges[c - 1] };
                let upper: Cell = rose.speed_edges.get(c).copied().into();
                rose_rows.push(vec![
                    s.location.clone().into(),
                    member.clone().into(),
                    (*centre).into(),
                    lower.into(),
                    upper,
                    (*f).into(),
                ]);
            }
        }
        entries.push(json!({
            "location": s.location,
            "member": s.member,
            "n": s.len(),
            "cadence_seconds": s.cadence_seconds(),
            "calm_fraction": rose.calm_fraction,
            "missing_direction": rose.missing_direction,
            "diurnal": profile,
            "windrose": rose,
        }));
    }
    let mut out = OutputDir::create(&a.output.out, a.output.full_precision)?;
    out.write_csv("diurnal.csv", &["location", "member", "hour", "mean_speed", "count"], &diurnal_rows)?;
    out.write_csv(
        "windrose.csv",
        &["location", "member", "sector_deg", "speed_lower", "speed_upper", "frequency"],
        &rose_rows,
    )?;
    out.write_json("summary.json", &json!({ "season": a.season, "series": entries, "ingest": loaded.report_json() }))?;
    finish(out, "summarize", a, &a.input.inputs)
}

pub fn synth(a: &SynthArgs) -> Result<Value, CliError> {
    if a.members < 2 {
        return Err(CliError::Config("--members must be at least 2".into()));
    }
    if a.years < 2 || a.step_hours <= 0 {
        return Err(CliError::Config("--years must be at least 2 and --step-hours positive".into()));
    }
    let mut out = OutputDir::create(&a.output.out, a.output.full_precision)?;
    for (name, future) in [("hist.csv", false), ("fut.csv", true)] {
        let series = synth::period(a.seed, a.members, future, a.years, a.step_hours);
        let mut buf = Vec::new();
        write_csv(&series, &mut buf)?;
        out.write_bytes(name, &buf)?;
    }
    finish(out, "synth", a, &[])
}
