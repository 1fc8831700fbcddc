//! Subcommands. Each writes a bundle directory and returns what it wrote;
//! `main` only maps errors to exit codes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use qlink_core::circuit::{effective_load, loaded_q1_t1, ChannelModel, LoadingNetwork};
use qlink_core::experiment::{
    apply_sweep_value, run_entangle, run_point, run_transfer, summarize, Executor, ExperimentSpec, SweepPoint,
};
use qlink_core::integrator::SweepRow;
use qlink_core::schedules::Protocol;
use qlink_core::statespace::{partial_trace, DensityMatrix};
use qlink_core::tomography::{self, ProcessMatrix, TomoGate, TomographyData};
use qlink_core::units::{ghz, mhz};
use serde::Deserialize;

use crate::bundle::{
    ensure_dir, num, opt, read_text, write_text, write_trajectory, ComplexMatrix, MetricsFile, SweepSummaryJson, Table,
    BASIS_PAULI, BASIS_TWO_QUBIT, CONFIG_SNAPSHOT, DEVICE_SNAPSHOT, METRICS_FILE, T1_TABLE_SNAPSHOT, TRAJECTORY_FILE,
};
use crate::config::{load_config, parse_config, LoadedConfig, Overrides, Resolved, LOSS_PRESETS};
use crate::device::load_device;
use crate::error::{HarnessError, Result};
use crate::exec::Pool;
use crate::presets::{names, preset_text};
use crate::tables::write_t1_table;

pub const TOMOGRAPHY_FILE: &str = "tomography.csv";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Detuning at which `circuit` reports the loaded Q1 lifetime.
pub const LOADED_T1_DETUNING_MHZ: f64 = 0.4;

/// Where a run configuration comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Config(PathBuf),
    Preset(String),
}

impl Source {
    pub fn load(&self) -> Result<LoadedConfig> {
        match self {
            Source::Config(path) => load_config(path),
            Source::Preset(name) => {
                let text = preset_text(name).ok_or_else(|| {
                    HarnessError::config(
                        "--preset",
                        format!("unknown preset {name:?}; available: {}", names().join(", ")),
                    )
                })?;
                parse_config(text, &format!("preset {name}"), None)
            }
        }
    }

    fn label(&self) -> String {
        match self {
            Source::Config(p) => {
                p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
            }
            Source::Preset(name) => name.clone(),
        }
    }
}

/// Options shared by the simulation subcommands.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub source: Option<Source>,
    pub out: Option<PathBuf>,
    pub workers: usize,
    pub overrides: Overrides,
}

impl Invocation {
    pub fn new(source: Source) -> Self {
        Self { source: Some(source), out: None, workers: 1, overrides: Overrides::default() }
    }

    pub fn preset(name: &str) -> Self {
        Self::new(Source::Preset(name.to_owned()))
    }

    pub fn out(mut self, dir: impl Into<PathBuf>) -> Self {
        self.out = Some(dir.into());
        self
    }

    pub fn workers(mut self, n: usize) -> Self {
        self.workers = n;
        self
    }

    fn load(&self) -> Result<LoadedConfig> {
        match &self.source {
            Some(s) => s.load(),
            None => Err(HarnessError::config(
                "command line",
                format!("give --config PATH or --preset NAME (presets: {})", names().join(", ")),
            )),
        }
    }

    fn out_dir(&self, loaded: &LoadedConfig) -> PathBuf {
        if let Some(dir) = &self.out {
            return dir.clone();
        }
        if let Some(dir) = &loaded.config.output.dir {
            return dir.clone();
        }
        let label = self.source.as_ref().map(Source::label).unwrap_or_else(|| "run".into());
        PathBuf::from("qlink-out").join(label)
    }

    fn flags(&self) -> Vec<String> {
        let mut f = Vec::new();
        if self.overrides.no_spurious_loading {
            f.push(String::from("--no-spurious-loading"));
        }
        if self.overrides.subspace {
            f.push(String::from("--subspace"));
        }
        f
    }
}

/// One sweep row as written to `sweep.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub protocol: Protocol,
    pub value: f64,
    pub result: std::result::Result<SweepPoint, String>,
}

/// What a command wrote.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub dir: PathBuf,
    pub metrics: MetricsFile,
    pub sweep: Vec<SweepRecord>,
}

impl Bundle {
    pub fn failures(&self) -> usize {
        self.sweep.iter().filter(|r| r.result.is_err()).count()
    }

    /// `Err(PartialSweep)` when any sweep row failed.
    pub fn check_complete(&self) -> Result<()> {
        match self.failures() {
            0 => Ok(()),
            failed => Err(HarnessError::PartialSweep { failed, total: self.sweep.len() }),
        }
    }
}

/// Protocols a command accepts and how to describe them in an error.
type Requirement = Option<(fn(Protocol) -> bool, &'static str)>;

fn open_bundle(
    inv: &Invocation,
    command: &str,
    require: Requirement,
) -> Result<(LoadedConfig, Resolved, PathBuf, MetricsFile)> {
    let loaded = inv.load()?;
    let resolved = loaded.resolve(&inv.overrides)?;
    if let Some((accepts, expected)) = require {
        if !accepts(resolved.spec.protocol) {
            return Err(HarnessError::config(&loaded.origin, format!("protocol.kind: `{command}` needs {expected}")));
        }
    }
    let dir = inv.out_dir(&loaded);
    ensure_dir(&dir)?;
    write_text(&dir.join(CONFIG_SNAPSHOT), &snapshot_text(&loaded)?)?;
    write_text(&dir.join(DEVICE_SNAPSHOT), &loaded.device_text)?;
    if let Some(table) = &loaded.t1_table {
        write_t1_table(&dir.join(T1_TABLE_SNAPSHOT), table)?;
    }
    let mut m = MetricsFile::new(command, resolved.seed);
    m.flags = inv.flags();
    m.t1r_ns = resolved.spec.t1r_ns.filter(|_| !resolved.spec.lossless);
    info!("{command}: {} -> {}", loaded.origin, dir.display());
    Ok((loaded, resolved, dir, m))
}

/// The config as stored in a bundle. Paths to external files are pointed at
/// their copies in the bundle so that it reruns on its own; otherwise the
/// text is kept byte for byte.
fn snapshot_text(loaded: &LoadedConfig) -> Result<String> {
    let c = &loaded.config;
    if c.device.is_none() && c.loss.t1_table.is_none() {
        return Ok(loaded.text.clone());
    }
    let bad = |e: String| HarnessError::config(&loaded.origin, e);
    let mut table: toml::Table = toml::from_str(&loaded.text).map_err(|e| bad(e.to_string()))?;
    if c.device.is_some() {
        table.insert("device".into(), DEVICE_SNAPSHOT.into());
    }
    if c.loss.t1_table.is_some() {
        if let Some(loss) = table.get_mut("loss").and_then(toml::Value::as_table_mut) {
            loss.insert("t1_table".into(), T1_TABLE_SNAPSHOT.into());
        }
    }
    toml::to_string(&table).map_err(|e| bad(e.to_string()))
}

fn close_bundle(dir: PathBuf, metrics: MetricsFile, sweep: Vec<SweepRecord>) -> Result<Bundle> {
    write_text(&dir.join(METRICS_FILE), &metrics.to_json()?)?;
    Ok(Bundle { dir, metrics, sweep })
}

/// Labels of the four process-tomography inputs, in [`tomography::qpt_inputs`] order.
pub const QPT_INPUT_LABELS: [&str; 4] = ["g", "+", "+i", "e"];

fn write_tomography(path: &Path, records: &[(Option<&str>, TomographyData)]) -> Result<PathBuf> {
    let process = records.iter().any(|r| r.0.is_some());
    let mut header: Vec<String> = Vec::new();
    if process {
        header.push("input".into());
    }
    header.extend(["gate_q1", "gate_q2", "p_gg", "p_ge", "p_eg", "p_ee"].map(String::from));
    let mut t = Table::create(path, &header)?;
    for (input, data) in records {
        for ((g1, g2), p) in &data.entries {
            let mut row: Vec<String> = input.iter().map(|s| s.to_string()).collect();
            row.extend([g1.label().to_owned(), g2.label().to_owned()]);
            row.extend(p.iter().map(|&x| num(x)));
            t.row(&row)?;
        }
    }
    t.finish()
}

/// State transfer: trajectory, η, and process tomography of Q1 → Q2.
pub fn cmd_transfer(inv: &Invocation) -> Result<Bundle> {
    let transfer: Requirement = Some((|p| !p.is_half(), "adiabatic_transfer or relay_transfer"));
    let (_, r, dir, mut m) = open_bundle(inv, "transfer", transfer)?;
    m.protocol = Some(r.spec.protocol.name().to_owned());
    let o = run_transfer(&r.spec)?;
    write_trajectory(&dir.join(TRAJECTORY_FILE), &o.trajectory)?;
    let records = o
        .qubit_states
        .iter()
        .zip(QPT_INPUT_LABELS)
        .map(|(rho, label)| Ok((Some(label), r.spec.raw_tomography_data(rho)?)))
        .collect::<Result<Vec<_>>>()?;
    write_tomography(&dir.join(TOMOGRAPHY_FILE), &records)?;
    m.set("eta", o.efficiency);
    m.set("process_fidelity", o.process_fidelity);
    m.set("process_distance", o.process_distance);
    m.set("min_eigenvalue", o.min_eigenvalue);
    m.chi = Some(ComplexMatrix::from_cmat(o.process.chi(), BASIS_PAULI));
    close_bundle(dir, m, vec![])
}

fn set_state_metrics(m: &mut MetricsFile, state: &DensityMatrix) -> Result<()> {
    m.set("state_fidelity", tomography::state_fidelity(state, &tomography::singlet())?);
    m.set("concurrence", tomography::concurrence(state)?);
    m.set("purity", state.purity());
    m.state = Some(ComplexMatrix::from_cmat(state.matrix(), BASIS_TWO_QUBIT));
    m.pauli = Some(tomography::pauli_expectations(state)?);
    Ok(())
}

/// Half protocol: two-qubit state, F_s against |ψ⁻⟩, concurrence and Pauli table.
pub fn cmd_entangle(inv: &Invocation) -> Result<Bundle> {
    let half: Requirement = Some((|p| p.is_half(), "adiabatic_half or relay_half"));
    let (_, r, dir, mut m) = open_bundle(inv, "entangle", half)?;
    m.protocol = Some(r.spec.protocol.name().to_owned());
    let o = run_entangle(&r.spec)?;
    write_trajectory(&dir.join(TRAJECTORY_FILE), &o.trajectory)?;
    let qubits = o.trajectory.final_qubits()?;
    write_tomography(&dir.join(TOMOGRAPHY_FILE), &[(None, r.spec.raw_tomography_data(&qubits)?)])?;
    set_state_metrics(&mut m, &o.state)?;
    m.set("min_eigenvalue", o.min_eigenvalue);
    close_bundle(dir, m, vec![])
}

fn sweep_base(loaded: &LoadedConfig, base: &ExperimentSpec, protocol: Protocol) -> ExperimentSpec {
    let mut spec = base.clone();
    spec.protocol = protocol;
    spec.release_ns = loaded.config.protocol.release_ns.unwrap_or(if protocol.is_half() { 10.0 } else { 0.0 });
    spec
}

/// Parameter sweep over one or more protocols. Rows run on a pool of
/// `inv.workers` threads and are written in input order. Failed rows are
/// recorded in the table; see [`Bundle::check_complete`].
pub fn cmd_sweep(inv: &Invocation) -> Result<Bundle> {
    let (loaded, r, dir, mut m) = open_bundle(inv, "sweep", None)?;
    let sweep =
        r.sweep.clone().ok_or_else(|| HarnessError::config(&loaded.origin, "sweep: missing [sweep] section"))?;
    if r.protocols.len() == 1 {
        m.protocol = Some(r.protocols[0].name().to_owned());
    }
    let jobs: Vec<(Protocol, f64)> =
        r.protocols.iter().flat_map(|&p| sweep.values.iter().map(move |&v| (p, v))).collect();
    let pool = Pool::new(inv.workers);
    info!("sweep: {} rows on {} workers", jobs.len(), pool.workers());
    let rows = pool.map(jobs, |(protocol, value)| {
        let base = sweep_base(&loaded, &r.spec, protocol);
        let result = apply_sweep_value(&base, &sweep, value).and_then(|s| run_point(&s, sweep.metric));
        (protocol, SweepRow { value, result })
    });

    let parameter = sweep.parameter.name();
    let header = [
        "protocol",
        "parameter",
        "value",
        "t_f_ns",
        "eta",
        "process_fidelity",
        "state_fidelity",
        "concurrence",
        "status",
        "error",
    ]
    .map(String::from);
    let mut table = Table::create(&dir.join(SWEEP_FILE), &header)?;
    let mut records = Vec::with_capacity(rows.len());
    for (protocol, row) in &rows {
        let mut line = vec![protocol.name().to_owned(), parameter.to_owned(), num(row.value)];
        match &row.result {
            Ok(p) => {
                line.extend([num(p.t_f_ns), opt(p.efficiency), opt(p.process_fidelity)]);
                line.extend([opt(p.state_fidelity), opt(p.concurrence), "ok".into(), String::new()]);
            }
            Err(e) => {
                warn!("{} at {parameter} = {}: {e}", protocol.name(), row.value);
                line.extend(std::iter::repeat_n(String::new(), 5));
                line.extend(["failed".into(), e.to_string()]);
            }
        }
        table.row(&line)?;
        records.push(SweepRecord {
            protocol: *protocol,
            value: row.value,
            result: row.result.clone().map_err(|e| e.to_string()),
        });
    }
    table.finish()?;

    for &protocol in &r.protocols {
        let mine: Vec<SweepRow<SweepPoint>> =
            rows.iter().filter(|(p, _)| *p == protocol).map(|(_, row)| row.clone()).collect();
        let name = protocol.name();
        let summary = summarize(&mine);
        if let Some(s) = &summary {
            m.set(&format!("{name}.argmax"), s.argmax);
            m.set(&format!("{name}.max"), s.max);
        }
        m.sweeps.push(SweepSummaryJson {
            protocol: name.to_owned(),
            parameter: parameter.to_owned(),
            metric: if protocol.is_half() { "state_fidelity" } else { "eta" }.to_owned(),
            argmax: summary.as_ref().map(|s| s.argmax),
            max: summary.as_ref().map(|s| s.max),
            local_maxima: summary
                .as_ref()
                .map(|s| s.local_maxima.iter().map(|&(x, y)| [x, y]).collect())
                .unwrap_or_default(),
            rows: mine.len(),
            failures: mine.iter().filter(|r| r.result.is_err()).count(),
        });
    }
    close_bundle(dir, m, records)
}

fn circuit_err(curve: &str, e: qlink_core::Error) -> HarnessError {
    HarnessError::Simulation(qlink_core::Error::Circuit(format!("{curve}: {e}")))
}

/// Circuit model outputs: mode RLC values, effective loads for the loss
/// presets, and loaded Q1 T1 curves and table at the configured lifetime.
pub fn cmd_circuit(inv: &Invocation) -> Result<Bundle> {
    let (loaded, r, dir, mut m) = open_bundle(inv, "circuit", None)?;
    let device = &loaded.device;
    let spec = &r.spec;
    let channel = ChannelModel::from_device(device);
    let n0 = channel.nearest_mode(ghz(device.channel.mode_freq_ghz));

    let header = ["mode_index", "offset", "freq_ghz", "r_ohm", "l_nh", "c_pf", "lifetime_ns"].map(String::from);
    let mut t = Table::create(&dir.join("rlc.csv"), &header)?;
    let n = spec.n_side_modes as i64;
    for offset in -n..=n {
        let index = n0 as i64 + offset;
        if index < 1 {
            continue;
        }
        let rlc = channel.mode_rlc(index as u32).map_err(|e| circuit_err("rlc", e))?;
        let f = channel.mode_frequency(index as u32) / ghz(1.0);
        t.row([
            index.to_string(),
            offset.to_string(),
            num(f),
            num(rlc.r_ohm),
            num(rlc.l_h * 1e9),
            num(rlc.c_f * 1e12),
            num(rlc.lifetime_ns()),
        ])?;
        if offset == 0 {
            m.set("implied_t1r_int_ns", rlc.lifetime_ns());
            m.set("mode_r_ohm", rlc.r_ohm);
        }
    }
    t.finish()?;

    let l_r = channel.mode_rlc(n0).map_err(|e| circuit_err("rlc", e))?.l_h;
    let header = ["preset", "t1r_ns", "t1r_ext_ns", "r_load_ohm"].map(String::from);
    let mut t = Table::create(&dir.join("loads.csv"), &header)?;
    for (name, t1r) in LOSS_PRESETS.iter().filter(|(n, _)| *n != "max-loss") {
        let load = effective_load(*t1r, device.channel.t1r_int_ns, l_r).map_err(|e| circuit_err("loads", e))?;
        t.row([name.to_string(), num(*t1r), num(load.t1r_ext_ns), num(load.r_load_ohm)])?;
    }
    t.finish()?;

    let t1r = spec.t1r_ns.unwrap_or(device.channel.t1r_int_ns);
    let net = LoadingNetwork::from_device(device, t1r).map_err(|e| circuit_err("network", e))?;
    let g1_mhz = if spec.protocol.is_adiabatic() { spec.gbar_mhz } else { spec.relay_g_mhz };
    m.t1r_ns = Some(t1r);
    m.set("r_load_ohm", net.r_load_ohm);
    m.set("g1_mhz", g1_mhz);

    let header = ["detuning_mhz", "t1_ns"].map(String::from);
    let mut t = Table::create(&dir.join("t1_vs_detuning.csv"), &header)?;
    for k in -50..=50 {
        let d = k as f64 / 10.0;
        let t1 = loaded_q1_t1(&net, mhz(d), mhz(g1_mhz)).map_err(|e| circuit_err("T1 vs detuning", e))?;
        t.row([num(d), num(t1)])?;
    }
    t.finish()?;

    let header = ["g1_mhz", "t1_ns"].map(String::from);
    let mut t = Table::create(&dir.join("t1_vs_coupling.csv"), &header)?;
    let steps = (g1_mhz / 0.5).floor() as usize;
    for k in 1..=steps.max(1) {
        let g = (k as f64 / 2.0).min(g1_mhz);
        let t1 =
            loaded_q1_t1(&net, mhz(spec.loading_detuning_mhz), mhz(g)).map_err(|e| circuit_err("T1 vs coupling", e))?;
        t.row([num(g), num(t1)])?;
    }
    t.finish()?;

    let anchor =
        loaded_q1_t1(&net, mhz(LOADED_T1_DETUNING_MHZ), mhz(g1_mhz)).map_err(|e| circuit_err("loaded T1", e))?;
    if anchor.is_finite() {
        m.set("loaded_t1_ns", anchor);
    }
    m.set("loaded_t1_detuning_mhz", LOADED_T1_DETUNING_MHZ);

    let table = spec.loading_table(t1r).map_err(|e| circuit_err("T1 table", e))?;
    write_t1_table(&dir.join("t1_table.csv"), &table)?;
    close_bundle(dir, m, vec![])
}

/// Parsed tomography input file.
#[derive(Debug, Clone, PartialEq)]
pub struct TomographyInput {
    /// One record per QPT input label, or a single unlabelled record.
    pub records: Vec<(Option<String>, TomographyData)>,
}

/// Reads `gate_q1, gate_q2` plus either `p_gg..p_ee` probabilities or
/// `n_gg..n_ee` counts, with an optional `input` column for process
/// tomography (labels `g`, `+`, `+i`, `e`).
pub fn read_tomography(path: &Path) -> Result<TomographyInput> {
    let origin = path.display().to_string();
    let bad = |msg: String| HarnessError::config(origin.clone(), msg);
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let g1 = find("gate_q1").ok_or_else(|| bad("missing column gate_q1".into()))?;
    let g2 = find("gate_q2").ok_or_else(|| bad("missing column gate_q2".into()))?;
    let outcomes = ["gg", "ge", "eg", "ee"];
    let probs: Option<Vec<usize>> = outcomes.iter().map(|o| find(&format!("p_{o}"))).collect();
    let counts: Option<Vec<usize>> = outcomes.iter().map(|o| find(&format!("n_{o}"))).collect();
    let (cols, are_counts) = match (probs, counts) {
        (Some(c), None) => (c, false),
        (None, Some(c)) => (c, true),
        (Some(_), Some(_)) => return Err(bad("give either p_* or n_* columns, not both".into())),
        (None, None) => return Err(bad("missing outcome columns p_gg..p_ee or n_gg..n_ee".into())),
    };
    let input_col = find("input");
    let mut records: Vec<(Option<String>, TomographyData)> = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let gate = |i: usize| {
            let s = rec.get(i).unwrap_or("").trim();
            TomoGate::parse(s).ok_or_else(|| bad(format!("row {line}: unknown gate {s:?}")))
        };
        let setting = (gate(g1)?, gate(g2)?);
        let mut p = [0.0; 4];
        for (slot, &c) in p.iter_mut().zip(&cols) {
            let s = rec.get(c).unwrap_or("").trim();
            *slot = s.parse::<f64>().map_err(|_| bad(format!("row {line}: {s:?} is not a number")))?;
            if !(slot.is_finite() && *slot >= 0.0) {
                return Err(bad(format!("row {line}: outcome values must be finite and ≥ 0")));
            }
        }
        let total: f64 = p.iter().sum();
        if are_counts {
            if total == 0.0 {
                return Err(bad(format!("row {line}: no counts")));
            }
            p = p.map(|x| x / total);
        } else if (total - 1.0).abs() > 1e-6 {
            return Err(bad(format!("row {line}: probabilities sum to {total}")));
        }
        let label = match input_col {
            None => None,
            Some(c) => {
                let s = rec.get(c).unwrap_or("").trim();
                if !QPT_INPUT_LABELS.contains(&s) {
                    return Err(bad(format!("row {line}: input {s:?} is not one of {QPT_INPUT_LABELS:?}")));
                }
                Some(s.to_owned())
            }
        };
        match records.iter_mut().find(|(l, _)| *l == label) {
            Some((_, data)) => data.entries.push((setting, p)),
            None => records.push((label, TomographyData { entries: vec![(setting, p)] })),
        }
    }
    if records.is_empty() {
        return Err(bad("no data rows".into()));
    }
    if input_col.is_some() {
        let mut ordered = Vec::with_capacity(4);
        for label in QPT_INPUT_LABELS {
            let i = records
                .iter()
                .position(|(l, _)| l.as_deref() == Some(label))
                .ok_or_else(|| bad(format!("process data needs input {label:?}")))?;
            ordered.push(records.swap_remove(i));
        }
        records = ordered;
    }
    Ok(TomographyInput { records })
}

/// Estimators on a stored measurement file. The config (if any) supplies
/// the readout correction and the Q2 frame; without one the data are taken
/// as already corrected, in the frame of the file.
pub fn cmd_tomography(inv: &Invocation, data: &Path) -> Result<Bundle> {
    let input = read_tomography(data)?;
    let (spec, dir, mut m) = match &inv.source {
        Some(_) => {
            let (_, r, dir, m) = open_bundle(inv, "tomography", None)?;
            (r.spec, dir, m)
        }
        None => {
            let mut spec = ExperimentSpec::reference(Protocol::AdiabaticHalf);
            spec.phase_q2 = Some(0.0);
            let dir = inv.out.clone().unwrap_or_else(|| PathBuf::from("qlink-out").join("tomography"));
            ensure_dir(&dir)?;
            let seed = inv.overrides.seed.unwrap_or(0);
            (spec, dir, MetricsFile::new("tomography", seed))
        }
    };
    m.t1r_ns = None;
    if input.records[0].0.is_some() {
        let outputs = input
            .records
            .iter()
            .map(|(_, d)| partial_trace(&spec.estimate_state(d)?, &[1]))
            .collect::<qlink_core::Result<Vec<_>>>()?;
        let process = tomography::process_tomography(&outputs)?;
        let ideal = ProcessMatrix::identity();
        m.set("process_fidelity", tomography::process_fidelity(&process, &ideal));
        m.set("process_distance", tomography::trace_distance_chi(&process, &ideal));
        m.chi = Some(ComplexMatrix::from_cmat(process.chi(), BASIS_PAULI));
    } else {
        let state = spec.estimate_state(&input.records[0].1)?;
        set_state_metrics(&mut m, &state)?;
    }
    close_bundle(dir, m, vec![])
}

/// Absolute tolerances for `compare`.
///
/// ```toml
/// default = 0.0        # metrics not listed below
/// [metrics]
/// eta = 0.02
/// ```
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default)]
    pub default: f64,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
}

impl Tolerances {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let t: Tolerances = toml::from_str(text).map_err(|e| HarnessError::config(origin, e.to_string()))?;
        if let Some((k, v)) = std::iter::once(("default", &t.default))
            .chain(t.metrics.iter().map(|(k, v)| (k.as_str(), v)))
            .find(|(_, v)| !(**v >= 0.0))
        {
            return Err(HarnessError::config(origin, format!("tolerance {k} must be ≥ 0, got {v}")));
        }
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, &path.display().to_string())
    }

    pub fn for_metric(&self, name: &str) -> f64 {
        self.metrics.get(name).copied().unwrap_or(self.default)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricDelta {
    pub name: String,
    pub a: f64,
    pub b: f64,
    pub abs: f64,
    pub rel: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub deltas: Vec<MetricDelta>,
}

impl CompareReport {
    pub fn passed(&self) -> bool {
        self.deltas.iter().all(|d| d.pass)
    }

    /// `Err(Regression)` naming every metric outside its tolerance.
    pub fn check(&self) -> Result<()> {
        let failed: Vec<String> = self
            .deltas
            .iter()
            .filter(|d| !d.pass)
            .map(|d| format!("{} (|Δ| = {:.3e} > {:.3e})", d.name, d.abs, d.tolerance))
            .collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Regression(failed.join(", ")))
        }
    }

    pub fn render(&self) -> String {
        let mut s =
            format!("{:<28} {:>14} {:>14} {:>11} {:>11} {:>10}  status\n", "metric", "a", "b", "abs", "rel", "tol");
        for d in &self.deltas {
            s.push_str(&format!(
                "{:<28} {:>14.8} {:>14.8} {:>11.3e} {:>11.3e} {:>10.3e}  {}\n",
                d.name,
                d.a,
                d.b,
                d.abs,
                d.rel,
                d.tolerance,
                if d.pass { "PASS" } else { "FAIL" }
            ));
        }
        s
    }
}

fn metrics_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(METRICS_FILE)
    } else {
        p.to_path_buf()
    }
}

/// Per-metric deltas between two metrics files (or bundle directories).
pub fn compare_metrics(a: &MetricsFile, b: &MetricsFile, tol: &Tolerances) -> Result<CompareReport> {
    if a.command != b.command || a.protocol != b.protocol {
        return Err(HarnessError::Schema(format!(
            "cannot compare {} ({:?}) with {} ({:?})",
            a.command, a.protocol, b.command, b.protocol
        )));
    }
    let ka: Vec<&String> = a.metrics.keys().collect();
    let kb: Vec<&String> = b.metrics.keys().collect();
    if ka != kb {
        return Err(HarnessError::Schema(format!("metric sets differ: {ka:?} vs {kb:?}")));
    }
    let deltas = a
        .metrics
        .iter()
        .map(|(name, &va)| {
            let vb = b.metrics[name];
            let abs = (va - vb).abs();
            let scale = va.abs().max(vb.abs());
            let rel = if scale > 0.0 { abs / scale } else { 0.0 };
            let tolerance = tol.for_metric(name);
            MetricDelta { name: name.clone(), a: va, b: vb, abs, rel, tolerance, pass: abs <= tolerance }
        })
        .collect();
    Ok(CompareReport { deltas })
}

pub fn cmd_compare(a: &Path, b: &Path, tolerances: Option<&Path>) -> Result<CompareReport> {
    let ma = MetricsFile::read(&metrics_path(a))?;
    let mb = MetricsFile::read(&metrics_path(b))?;
    let tol = match tolerances {
        Some(p) => Tolerances::load(p)?,
        None => Tolerances::default(),
    };
    compare_metrics(&ma, &mb, &tol)
}

/// Checks a config, device, tolerance or metrics file and names its kind.
pub fn cmd_validate(path: &Path) -> Result<&'static str> {
    let origin = path.display().to_string();
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => MetricsFile::read(path).map(|_| "metrics"),
        Some("toml") => {
            let text = read_text(path)?;
            let table: toml::Table = toml::from_str(&text).map_err(|e| HarnessError::config(&origin, e.to_string()))?;
            if table.contains_key("protocol") {
                load_config(path).map(|_| "config")
            } else if table.contains_key("q1") {
                load_device(path).map(|_| "device")
            } else if table.contains_key("metrics") || table.contains_key("default") {
                Tolerances::parse(&text, &origin).map(|_| "tolerances")
            } else {
                Err(HarnessError::config(origin, "not a config, device or tolerance file"))
            }
        }
        _ => Err(HarnessError::config(origin, "expected a .toml or .json file")),
    }
}
