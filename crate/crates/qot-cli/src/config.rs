//! Scenario configuration files: human-readable key-value sections plus a
//! stage list, with spectral tables referenced by path relative to the file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use qot_core::gn::{ClosedFormConfig, IntegralConfig};
use qot_core::link::{LinkConfig, LinkScenario, NliTracking, SpectrumValue, Stage};
use qot_core::qot::Band;
use qot_core::raman::{Direction, Pump, PumpSet, RamanSolverConfig};
use qot_core::spectral::{
    dbm_to_watt, frequency_to_wavelength_nm, AxisUnit, Channel, ChannelPlan, Extrapolation,
    FibreSpec, Modulation, SpectralTable,
};

use crate::table_io::read_table;

#[derive(Debug)]
pub struct ConfigError {
    pub path: String,
    pub line: usize,
    pub message: String,
}

impl ConfigError {
    fn new(path: &Path, line: usize, message: impl Into<String>) -> Self {
        Self {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "{}:{}: {}", self.path, self.line, self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

/// Fully-built scenario, ready for the runners.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub plan: ChannelPlan,
    pub bands: Vec<Band>,
    pub fibre: FibreSpec,
    pub pumps: PumpSet,
    pub stages: Vec<Stage>,
    pub recirculations: usize,
    pub trx_snr: Option<SpectralTable>,
    pub solver: RamanSolverConfig,
    pub nli: NliTracking,
    pub integral: IntegralConfig,
    pub pilot_overhead: f64,
    pub gh_nodes: usize,
    pub nf_warning_threshold_db: f64,
}

impl Scenario {
    pub fn link_scenario(&self) -> LinkScenario {
        LinkScenario {
            plan: self.plan.clone(),
            loop_stages: self.stages.clone(),
            recirculations: self.recirculations,
            trx_snr: self.trx_snr.clone(),
            config: LinkConfig {
                solver: self.solver,
                nli: self.nli.clone(),
            },
        }
    }
}

struct Entry {
    line: usize,
    text: String,
}

struct Sections {
    top: Vec<Entry>,
    named: BTreeMap<String, Vec<Entry>>,
}

fn split_sections(path: &Path, text: &str) -> Result<Sections, ConfigError> {
    let mut sections = Sections {
        top: Vec::new(),
        named: BTreeMap::new(),
    };
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::new(path, line_no, "unterminated section header"))?
                .trim()
                .to_string();
            if name.is_empty() {
                return Err(ConfigError::new(path, line_no, "empty section name"));
            }
            sections.named.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let entry = Entry {
            line: line_no,
            text: line.to_string(),
        };
        match &current {
            None => sections.top.push(entry),
            Some(name) => sections.named.get_mut(name).unwrap().push(entry),
        }
    }
    Ok(sections)
}

/// key = value pairs with duplicate detection; remembers which keys were read
/// so unknown keys can be reported.
struct KvBlock<'a> {
    path: &'a Path,
    section: &'a str,
    entries: BTreeMap<String, (usize, String)>,
    consumed: Vec<String>,
}

impl<'a> KvBlock<'a> {
    fn parse(path: &'a Path, section: &'a str, entries: &[Entry]) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for e in entries {
            let (key, value) = e.text.split_once('=').ok_or_else(|| {
                ConfigError::new(path, e.line, format!("expected 'key = value', got '{}'", e.text))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if map.insert(key.clone(), (e.line, value)).is_some() {
                return Err(ConfigError::new(
                    path,
                    e.line,
                    format!("duplicate key '{key}' in [{section}]"),
                ));
            }
        }
        Ok(Self {
            path,
            section,
            entries: map,
            consumed: Vec::new(),
        })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.consumed.push(key.to_string());
        self.entries.get(key).cloned()
    }

    fn required_f64(&mut self, key: &str) -> Result<f64, ConfigError> {
        let (line, value) = self.take(key).ok_or_else(|| {
            ConfigError::new(
                self.path,
                0,
                format!("missing key '{key}' in [{}]", self.section),
            )
        })?;
        value.parse().map_err(|_| {
            ConfigError::new(self.path, line, format!("'{key}' is not a number: '{value}'"))
        })
    }

    fn optional_f64(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some((line, value)) => value.parse().map_err(|_| {
                ConfigError::new(self.path, line, format!("'{key}' is not a number: '{value}'"))
            }),
        }
    }

    fn optional_usize(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some((line, value)) => value.parse().map_err(|_| {
                ConfigError::new(self.path, line, format!("'{key}' is not an integer: '{value}'"))
            }),
        }
    }

    fn optional_bool(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some((line, value)) => match value.as_str() {
                "true" | "on" | "yes" => Ok(true),
                "false" | "off" | "no" => Ok(false),
                _ => Err(ConfigError::new(
                    self.path,
                    line,
                    format!("'{key}' must be true/false, got '{value}'"),
                )),
            },
        }
    }

    fn optional_str(&mut self, key: &str) -> Option<(usize, String)> {
        self.take(key)
    }

    fn finish(self) -> Result<(), ConfigError> {
        for (key, (line, _)) in &self.entries {
            if !self.consumed.contains(key) {
                return Err(ConfigError::new(
                    self.path,
                    *line,
                    format!("unknown key '{key}' in [{}]", self.section),
                ));
            }
        }
        Ok(())
    }
}

fn parse_axis(path: &Path, line: usize, value: &str) -> Result<AxisUnit, ConfigError> {
    match value {
        "nm" => Ok(AxisUnit::Nm),
        "hz" => Ok(AxisUnit::Hz),
        "thz" => Ok(AxisUnit::Thz),
        _ => Err(ConfigError::new(
            path,
            line,
            format!("axis must be nm/hz/thz, got '{value}'"),
        )),
    }
}

fn load_table_rel(
    path: &Path,
    base: &Path,
    line: usize,
    file: &str,
    axis: AxisUnit,
    extrapolation: Extrapolation,
) -> Result<SpectralTable, ConfigError> {
    let full = base.join(file);
    read_table(&full, axis, extrapolation)
        .map_err(|e| ConfigError::new(path, line, format!("table '{file}': {e}")))
}

/// Parse and build a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new(path, 0, format!("cannot read scenario: {e}")))?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let sections = split_sections(path, &text)?;

    // Top-level keys.
    let mut top = KvBlock::parse(path, "top level", &sections.top)?;
    let recirculations = top.optional_usize("recirculations", 1)?;
    let pilot_overhead = top.optional_f64("pilot_overhead", 1.0 / 32.0)?;
    let gh_nodes = top.optional_usize("gh_nodes", 64)?;
    let nf_warning_threshold_db = top.optional_f64("nf_warning_threshold_db", 3.0)?;
    let fit_terms = top.optional_usize("fit_terms", 4)?;
    let residual_gate_db = top.optional_f64("residual_gate_db", 0.5)?;
    let xpm_truncation = top.optional_f64("xpm_truncation", 1e-4)?;
    let nodes_per_band = top.optional_usize("integral_nodes_per_band", 16)?;
    let island_threshold = top.optional_f64("integral_island_threshold", 1e-5)?;
    let integral = IntegralConfig {
        nodes_per_band,
        island_threshold,
        ..IntegralConfig::default()
    };
    let nli = match top.optional_str("nli_method") {
        None => NliTracking::ClosedForm {
            fit_terms,
            config: ClosedFormConfig {
                residual_gate_db,
                xpm_truncation,
            },
        },
        Some((line, value)) => match value.as_str() {
            "closed_form" => NliTracking::ClosedForm {
                fit_terms,
                config: ClosedFormConfig {
                    residual_gate_db,
                    xpm_truncation,
                },
            },
            "integral" => NliTracking::Integral(integral),
            "off" => NliTracking::Off,
            _ => {
                return Err(ConfigError::new(
                    path,
                    line,
                    format!("nli_method must be closed_form/integral/off, got '{value}'"),
                ))
            }
        },
    };
    top.finish()?;

    // [grid]
    let grid_entries = sections
        .named
        .get("grid")
        .ok_or_else(|| ConfigError::new(path, 0, "missing [grid] section"))?;
    let mut grid = KvBlock::parse(path, "grid", grid_entries)?;
    let start_thz = grid.required_f64("start_frequency_thz")?;
    let count = grid.optional_usize("channel_count", 0)?;
    let spacing_ghz = grid.required_f64("spacing_ghz")?;
    let symbol_rate_gbaud = grid.required_f64("symbol_rate_gbaud")?;
    let modulation = match grid.optional_str("modulation") {
        None => Modulation::Qam64,
        Some((line, value)) => match value.as_str() {
            "qam64" => Modulation::Qam64,
            "gaussian" => Modulation::Gaussian,
            _ => {
                return Err(ConfigError::new(
                    path,
                    line,
                    format!("modulation must be qam64/gaussian, got '{value}'"),
                ))
            }
        },
    };
    grid.finish()?;
    if count == 0 {
        return Err(ConfigError::new(path, 0, "channel_count must be at least 1"));
    }

    // [bands] rows: LABEL min_nm max_nm launch_total_dbm
    let band_entries = sections
        .named
        .get("bands")
        .ok_or_else(|| ConfigError::new(path, 0, "missing [bands] section"))?;
    let mut bands = Vec::new();
    let mut band_totals_dbm = Vec::new();
    for e in band_entries {
        let fields: Vec<&str> = e.text.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(ConfigError::new(
                path,
                e.line,
                format!("band rows are 'label min_nm max_nm total_dbm', got '{}'", e.text),
            ));
        }
        let parse = |s: &str, what: &str| -> Result<f64, ConfigError> {
            s.parse()
                .map_err(|_| ConfigError::new(path, e.line, format!("{what} is not a number: '{s}'")))
        };
        let min_nm = parse(fields[1], "band min")?;
        let max_nm = parse(fields[2], "band max")?;
        let total_dbm = parse(fields[3], "band launch power")?;
        if max_nm <= min_nm {
            return Err(ConfigError::new(path, e.line, "band max must exceed min"));
        }
        bands.push(Band {
            label: fields[0].to_string(),
            min_nm,
            max_nm,
        });
        band_totals_dbm.push(total_dbm);
    }
    if bands.is_empty() {
        return Err(ConfigError::new(path, 0, "[bands] must list at least one band"));
    }

    // Build the channel plan: uniform grid with per-band power split.
    let spacing = spacing_ghz * 1e9;
    let symbol_rate = symbol_rate_gbaud * 1e9;
    let f_start = start_thz * 1e12;
    let freqs: Vec<f64> = (0..count).map(|i| f_start + i as f64 * spacing).collect();
    let band_of = |f: f64| -> Option<usize> {
        let nm = frequency_to_wavelength_nm(f);
        bands.iter().position(|b| b.contains(nm))
    };
    let mut band_counts = vec![0usize; bands.len()];
    for &f in &freqs {
        match band_of(f) {
            Some(b) => band_counts[b] += 1,
            None => {
                return Err(ConfigError::new(
                    path,
                    0,
                    format!(
                        "channel at {:.2} nm falls outside every configured band",
                        frequency_to_wavelength_nm(f)
                    ),
                ))
            }
        }
    }
    // Optional launch-spectrum trim (dB vs nm), e.g. WSS-balanced band-edge
    // tapering; band totals are re-normalized afterwards.
    let mut trim: Option<SpectralTable> = None;
    if let Some(entries) = sections.named.get("launch") {
        let mut lv = KvBlock::parse(path, "launch", entries)?;
        if let Some((line, file)) = lv.optional_str("trim_file") {
            trim = Some(load_table_rel(
                path,
                &base,
                line,
                &file,
                AxisUnit::Nm,
                Extrapolation::Clamp,
            )?);
        }
        lv.finish()?;
    }
    let trim_linear = |f: f64| -> Result<f64, ConfigError> {
        match &trim {
            None => Ok(1.0),
            Some(t) => {
                let nm = frequency_to_wavelength_nm(f);
                let db = t
                    .eval(nm)
                    .map_err(|e| ConfigError::new(path, 0, format!("launch trim: {e}")))?;
                Ok(10f64.powf(db / 10.0))
            }
        }
    };
    let mut band_weight = vec![0.0f64; bands.len()];
    let mut weights = Vec::with_capacity(freqs.len());
    for &f in &freqs {
        let w = trim_linear(f)?;
        band_weight[band_of(f).unwrap()] += w;
        weights.push(w);
    }
    let channels: Vec<Channel> = freqs
        .iter()
        .zip(&weights)
        .map(|(&f, &w)| {
            let b = band_of(f).unwrap();
            let total_w = dbm_to_watt(band_totals_dbm[b]).unwrap();
            Channel {
                center_frequency: f,
                symbol_rate,
                launch_power: total_w * w / band_weight[b],
                modulation,
            }
        })
        .collect();
    let plan = ChannelPlan::new(channels)
        .map_err(|e| ConfigError::new(path, 0, format!("invalid channel plan: {e}")))?;

    // [fibre]
    let fibre_entries = sections
        .named
        .get("fibre")
        .ok_or_else(|| ConfigError::new(path, 0, "missing [fibre] section"))?;
    let mut fb = KvBlock::parse(path, "fibre", fibre_entries)?;
    let length_km = fb.required_f64("length_km")?;
    let gamma = fb.required_f64("gamma_per_w_km")?;
    let aeff = fb.required_f64("effective_area_um2")?;
    let disp = fb.required_f64("dispersion_ps_nm_km")?;
    let slope = fb.required_f64("dispersion_slope_ps_nm2_km")?;
    let ref_nm = fb.required_f64("reference_wavelength_nm")?;
    let att_axis = match fb.optional_str("attenuation_axis") {
        None => AxisUnit::Nm,
        Some((line, v)) => parse_axis(path, line, &v)?,
    };
    let raman_axis = match fb.optional_str("raman_gain_axis") {
        None => AxisUnit::Thz,
        Some((line, v)) => parse_axis(path, line, &v)?,
    };
    let (att_line, att_file) = fb
        .optional_str("attenuation_file")
        .ok_or_else(|| ConfigError::new(path, 0, "missing 'attenuation_file' in [fibre]"))?;
    let (rg_line, rg_file) = fb
        .optional_str("raman_gain_file")
        .ok_or_else(|| ConfigError::new(path, 0, "missing 'raman_gain_file' in [fibre]"))?;
    fb.finish()?;

    let attenuation = load_table_rel(path, &base, att_line, &att_file, att_axis, Extrapolation::Error)?;
    let raman_gain = load_table_rel(path, &base, rg_line, &rg_file, raman_axis, Extrapolation::Clamp)?;
    let fibre = FibreSpec {
        length_km,
        attenuation,
        raman_gain,
        gamma_per_w_km: gamma,
        effective_area_um2: aeff,
        dispersion_ps_nm_km: disp,
        dispersion_slope_ps_nm2_km: slope,
        reference_wavelength_nm: ref_nm,
    };
    fibre
        .validate()
        .map_err(|e| ConfigError::new(path, 0, format!("invalid fibre: {e}")))?;

    // [pumps] rows: wavelength_nm power_mw direction
    let mut pumps = Vec::new();
    if let Some(entries) = sections.named.get("pumps") {
        for e in entries {
            let fields: Vec<&str> = e.text.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(ConfigError::new(
                    path,
                    e.line,
                    format!("pump rows are 'wavelength_nm power_mw direction', got '{}'", e.text),
                ));
            }
            let wavelength_nm: f64 = fields[0].parse().map_err(|_| {
                ConfigError::new(path, e.line, format!("bad pump wavelength '{}'", fields[0]))
            })?;
            let power_mw: f64 = fields[1].parse().map_err(|_| {
                ConfigError::new(path, e.line, format!("bad pump power '{}'", fields[1]))
            })?;
            let direction = match fields[2] {
                "backward" => Direction::Backward,
                "forward" => Direction::Forward,
                other => {
                    return Err(ConfigError::new(
                        path,
                        e.line,
                        format!("pump direction must be backward/forward, got '{other}'"),
                    ))
                }
            };
            pumps.push(Pump {
                wavelength_nm,
                power_w: power_mw * 1e-3,
                direction,
            });
        }
    }
    let pumps = PumpSet::new(pumps)
        .map_err(|e| ConfigError::new(path, 0, format!("invalid pump set: {e}")))?;

    // [solver]
    let mut solver = RamanSolverConfig::default();
    if let Some(entries) = sections.named.get("solver") {
        let mut sv = KvBlock::parse(path, "solver", entries)?;
        solver.z_step_max_km = sv.optional_f64("z_step_km", solver.z_step_max_km)?;
        solver.bvp_tolerance = sv.optional_f64("bvp_tolerance", solver.bvp_tolerance)?;
        solver.max_iterations = sv.optional_usize("max_iterations", solver.max_iterations)?;
        solver.temperature_k = sv.optional_f64("temperature_k", solver.temperature_k)?;
        solver.include_pump_depletion =
            sv.optional_bool("include_pump_depletion", solver.include_pump_depletion)?;
        solver.rtol = sv.optional_f64("rtol", solver.rtol)?;
        sv.finish()?;
    }

    // [trx]
    let mut trx_snr = None;
    if let Some(entries) = sections.named.get("trx") {
        let mut tv = KvBlock::parse(path, "trx", entries)?;
        if let Some((line, file)) = tv.optional_str("snr_file") {
            trx_snr = Some(load_table_rel(
                path,
                &base,
                line,
                &file,
                AxisUnit::Nm,
                Extrapolation::Clamp,
            )?);
        }
        tv.finish()?;
    }

    // [stages]
    let mut stages = Vec::new();
    if let Some(entries) = sections.named.get("stages") {
        for e in entries {
            stages.push(parse_stage(path, &base, e, &fibre, &pumps)?);
        }
    }

    if recirculations < 1 {
        return Err(ConfigError::new(path, 0, "recirculations must be at least 1"));
    }

    Ok(Scenario {
        plan,
        bands,
        fibre,
        pumps,
        stages,
        recirculations,
        trx_snr,
        solver,
        nli,
        integral,
        pilot_overhead,
        gh_nodes,
        nf_warning_threshold_db,
    })
}

fn parse_stage(
    path: &Path,
    base: &PathBuf,
    e: &Entry,
    fibre: &FibreSpec,
    pumps: &PumpSet,
) -> Result<Stage, ConfigError> {
    let mut fields = e.text.split_whitespace();
    let kind = fields.next().unwrap_or_default();
    let mut kv = BTreeMap::new();
    for f in fields {
        let (k, v) = f.split_once('=').ok_or_else(|| {
            ConfigError::new(path, e.line, format!("stage options are key=value, got '{f}'"))
        })?;
        kv.insert(k.to_string(), v.to_string());
    }
    let take_scalar = |kv: &mut BTreeMap<String, String>, key: &str| -> Result<Option<f64>, ConfigError> {
        match kv.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError::new(path, e.line, format!("bad number for '{key}': '{v}'"))),
        }
    };
    let take_value = |kv: &mut BTreeMap<String, String>,
                          scalar_key: &str,
                          file_key: &str|
     -> Result<Option<SpectrumValue>, ConfigError> {
        let scalar = take_scalar(kv, scalar_key)?;
        let file = kv.remove(file_key);
        match (scalar, file) {
            (Some(_), Some(_)) => Err(ConfigError::new(
                path,
                e.line,
                format!("give either {scalar_key} or {file_key}, not both"),
            )),
            (Some(v), None) => Ok(Some(SpectrumValue::Scalar(v))),
            (None, Some(f)) => Ok(Some(SpectrumValue::Table(load_table_rel(
                path,
                base,
                e.line,
                &f,
                AxisUnit::Nm,
                Extrapolation::Error,
            )?))),
            (None, None) => Ok(None),
        }
    };

    let stage = match kind {
        "fibre_span" => Stage::FibreSpan {
            fibre: fibre.clone(),
            pumps: pumps.clone(),
        },
        "amp" => {
            let gain = take_value(&mut kv, "gain_db", "gain_file")?.ok_or_else(|| {
                ConfigError::new(path, e.line, "amp needs gain_db or gain_file")
            })?;
            let nf = take_value(&mut kv, "nf_db", "nf_file")?.ok_or_else(|| {
                ConfigError::new(path, e.line, "amp needs nf_db or nf_file")
            })?;
            Stage::LumpedAmp {
                gain_db: gain,
                noise_figure_db: nf,
            }
        }
        "loss" => {
            let att = take_value(&mut kv, "attenuation_db", "attenuation_file")?.ok_or_else(
                || ConfigError::new(path, e.line, "loss needs attenuation_db or attenuation_file"),
            )?;
            Stage::Loss { attenuation_db: att }
        }
        "wss" => {
            let file = kv.remove("attenuation_file").ok_or_else(|| {
                ConfigError::new(path, e.line, "wss needs attenuation_file")
            })?;
            Stage::Wss {
                attenuation_db: load_table_rel(
                    path,
                    base,
                    e.line,
                    &file,
                    AxisUnit::Nm,
                    Extrapolation::Error,
                )?,
            }
        }
        other => {
            return Err(ConfigError::new(
                path,
                e.line,
                format!("unknown stage '{other}' (expected fibre_span/amp/loss/wss)"),
            ))
        }
    };
    if let Some(extra) = kv.keys().next() {
        return Err(ConfigError::new(
            path,
            e.line,
            format!("unknown stage option '{extra}'"),
        ));
    }
    Ok(stage)
}
