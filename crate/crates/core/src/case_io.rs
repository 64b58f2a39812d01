//! Case input: MATPOWER M-file import, canonical JSON interchange, per-unit
//! conversion, and load scaling.
//!
//! MATPOWER files are import-only and only the `baseMVA`, `bus`, `gen` and
//! `branch` blocks are read; other blocks are skipped with a warning. The
//! canonical JSON format (`{name, base_mva, buses, branches, gens}`) is the
//! interchange and test-fixture format.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default voltage-magnitude bounds substituted when a case file stores zeros.
pub const DEFAULT_V_MIN: f64 = 0.9;
pub const DEFAULT_V_MAX: f64 = 1.1;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing mandatory block `{0}`")]
    MissingBlock(&'static str),
    #[error("validation: {0}")]
    Validation(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BusType {
    #[serde(rename = "PQ")]
    Pq,
    #[serde(rename = "PV")]
    Pv,
    #[serde(rename = "SLACK")]
    Slack,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    On,
    Off,
}

/// One bus row. Powers are MW/MVAr in a [`RawCase`] and per-unit in a
/// [`NetworkCase`]; the angle is degrees raw and radians converted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusRecord {
    pub id: u32,
    pub btype: BusType,
    pub p_demand: f64,
    pub q_demand: f64,
    pub g_shunt: f64,
    pub b_shunt: f64,
    pub v_mag_init: f64,
    pub v_ang_init: f64,
    pub base_kv: f64,
    pub v_max: f64,
    pub v_min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub from_bus: u32,
    pub to_bus: u32,
    pub r: f64,
    pub x: f64,
    pub b_charging: f64,
    pub tap: f64,
    pub shift: f64,
    pub status: Status,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenRecord {
    pub bus: u32,
    pub p_set: f64,
    pub q_init: f64,
    pub q_max: f64,
    pub q_min: f64,
    pub v_set: f64,
    pub status: Status,
}

/// A case as read from a MATPOWER file: original units, unvalidated bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawCase {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<BusRecord>,
    pub gens: Vec<GenRecord>,
    pub branches: Vec<BranchRecord>,
}

/// Validated per-unit case: powers in pu of `base_mva`, angles in radians,
/// taps normalized, out-of-service equipment dropped, one gen per bus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkCase {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<BusRecord>,
    pub branches: Vec<BranchRecord>,
    pub gens: Vec<GenRecord>,
}

/// Parses the MATPOWER M-file subset: `mpc.baseMVA`, `mpc.bus`, `mpc.gen`,
/// `mpc.branch`. `%` comments are stripped, other `mpc.*` assignments are
/// skipped, and the result is validated.
pub fn parse_matpower(text: &str) -> Result<RawCase, CaseError> {
    let mut name = String::new();
    let mut base_mva: Option<f64> = None;
    let mut buses: Option<Vec<BusRecord>> = None;
    let mut gens: Option<Vec<GenRecord>> = None;
    let mut branches: Option<Vec<BranchRecord>> = None;

    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0usize;
    while i < lines.len() {
        let line_no = i + 1;
        let line = strip_comment(lines[i]);
        let trimmed = line.trim();
        if trimmed.is_empty() {
            i += 1;
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("function") {
            if let Some(eq) = rest.find('=') {
                name = rest[eq + 1..].trim().to_string();
            }
            i += 1;
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("mpc.") {
            let field: String =
                rest.chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect();
            match field.as_str() {
                "baseMVA" => {
                    let v = scalar_assignment(trimmed, line_no)?;
                    base_mva = Some(v);
                    i += 1;
                }
                "bus" => {
                    let (rows, next) = read_matrix_block(&lines, i)?;
                    let mut out = Vec::with_capacity(rows.len());
                    for (ln, row) in &rows {
                        out.push(bus_from_row(row, *ln)?);
                    }
                    buses = Some(out);
                    i = next;
                }
                "gen" => {
                    let (rows, next) = read_matrix_block(&lines, i)?;
                    let mut out = Vec::with_capacity(rows.len());
                    for (ln, row) in &rows {
                        out.push(gen_from_row(row, *ln)?);
                    }
                    gens = Some(out);
                    i = next;
                }
                "branch" => {
                    let (rows, next) = read_matrix_block(&lines, i)?;
                    let mut out = Vec::with_capacity(rows.len());
                    for (ln, row) in &rows {
                        out.push(branch_from_row(row, *ln)?);
                    }
                    branches = Some(out);
                    i = next;
                }
                "version" => {
                    i += 1;
                }
                other => {
                    log::warn!("skipping unsupported block `mpc.{other}` at line {line_no}");
                    i = skip_block(&lines, i)?;
                }
            }
        } else {
            i += 1;
        }
    }

    let raw = RawCase {
        name,
        base_mva: base_mva.ok_or(CaseError::MissingBlock("baseMVA"))?,
        buses: buses.ok_or(CaseError::MissingBlock("bus"))?,
        gens: gens.ok_or(CaseError::MissingBlock("gen"))?,
        branches: branches.ok_or(CaseError::MissingBlock("branch"))?,
    };
    raw.validate()?;
    Ok(raw)
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(p) => &line[..p],
        None => line,
    }
}

fn scalar_assignment(line: &str, line_no: usize) -> Result<f64, CaseError> {
    let rhs = line.split('=').nth(1).ok_or_else(|| CaseError::Parse {
        line: line_no,
        msg: "expected `= <value>;`".into(),
    })?;
    rhs.trim().trim_end_matches(';').trim().parse().map_err(|_| CaseError::Parse {
        line: line_no,
        msg: format!("invalid numeric value in `{}`", line.trim()),
    })
}

/// Reads rows of a `mpc.<field> = [ ... ];` block starting at `start`.
/// Rows are terminated by `;` and may span lines; `]` closes the block.
/// Returns (line_number, values) per row and the index after the block.
fn read_matrix_block(
    lines: &[&str],
    start: usize,
) -> Result<(Vec<(usize, Vec<f64>)>, usize), CaseError> {
    let first = strip_comment(lines[start]);
    let open = first.find('[').ok_or_else(|| CaseError::Parse {
        line: start + 1,
        msg: "expected `[` to open a matrix block".into(),
    })?;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut pending: Vec<f64> = Vec::new();
    let mut pending_line = start + 1;
    let mut i = start;
    let mut body_text = first[open + 1..].to_string();
    loop {
        let line_no = i + 1;
        let (body, closed) = match body_text.find(']') {
            Some(p) => (body_text[..p].to_string(), true),
            None => (body_text.clone(), false),
        };
        let chunks: Vec<&str> = body.split(';').collect();
        let n_chunks = chunks.len();
        for (k, chunk) in chunks.iter().enumerate() {
            for t in chunk.split_whitespace() {
                if pending.is_empty() {
                    pending_line = line_no;
                }
                let v: f64 = t.parse().map_err(|_| CaseError::Parse {
                    line: line_no,
                    msg: format!("invalid numeric token `{t}`"),
                })?;
                pending.push(v);
            }
            let row_terminated = k + 1 < n_chunks;
            if row_terminated && !pending.is_empty() {
                rows.push((pending_line, std::mem::take(&mut pending)));
            }
        }
        if closed {
            if !pending.is_empty() {
                rows.push((pending_line, std::mem::take(&mut pending)));
            }
            return Ok((rows, i + 1));
        }
        i += 1;
        if i >= lines.len() {
            return Err(CaseError::Parse {
                line: start + 1,
                msg: "matrix block never closed with `];`".into(),
            });
        }
        body_text = strip_comment(lines[i]).to_string();
    }
}

/// Skips a `mpc.<field> = ...` assignment: single line, `[...]` matrix or
/// `{...}` cell block.
fn skip_block(lines: &[&str], start: usize) -> Result<usize, CaseError> {
    let first = strip_comment(lines[start]);
    let (open, close) = if first.contains('[') {
        ('[', ']')
    } else if first.contains('{') {
        ('{', '}')
    } else {
        return Ok(start + 1);
    };
    let mut i = start;
    loop {
        let text = if i == start {
            let p = first.find(open).unwrap();
            &first[p + 1..]
        } else {
            strip_comment(lines[i])
        };
        if text.contains(close) {
            return Ok(i + 1);
        }
        i += 1;
        if i >= lines.len() {
            return Err(CaseError::Parse {
                line: start + 1,
                msg: "block never closed".into(),
            });
        }
    }
}

fn int_field(v: f64, what: &str, line: usize) -> Result<u32, CaseError> {
    let r = v.round();
    if (v - r).abs() > 1e-9 || r < 0.0 || r > u32::MAX as f64 {
        return Err(CaseError::Parse { line, msg: format!("{what} must be a non-negative integer, got {v}") });
    }
    Ok(r as u32)
}

fn bus_from_row(row: &[f64], line: usize) -> Result<BusRecord, CaseError> {
    if row.len() < 13 {
        return Err(CaseError::Parse {
            line,
            msg: format!("bus row has {} columns, expected at least 13", row.len()),
        });
    }
    let btype = match row[1] as i64 {
        1 => BusType::Pq,
        2 => BusType::Pv,
        3 => BusType::Slack,
        t => {
            return Err(CaseError::Parse { line, msg: format!("unsupported bus type code {t}") });
        }
    };
    Ok(BusRecord {
        id: int_field(row[0], "bus id", line)?,
        btype,
        p_demand: row[2],
        q_demand: row[3],
        g_shunt: row[4],
        b_shunt: row[5],
        v_mag_init: row[7],
        v_ang_init: row[8],
        base_kv: row[9],
        v_max: row[11],
        v_min: row[12],
    })
}

fn gen_from_row(row: &[f64], line: usize) -> Result<GenRecord, CaseError> {
    if row.len() < 10 {
        return Err(CaseError::Parse {
            line,
            msg: format!("gen row has {} columns, expected at least 10", row.len()),
        });
    }
    Ok(GenRecord {
        bus: int_field(row[0], "gen bus id", line)?,
        p_set: row[1],
        q_init: row[2],
        q_max: row[3],
        q_min: row[4],
        v_set: row[5],
        status: if row[7] > 0.0 { Status::On } else { Status::Off },
    })
}

fn branch_from_row(row: &[f64], line: usize) -> Result<BranchRecord, CaseError> {
    if row.len() < 11 {
        return Err(CaseError::Parse {
            line,
            msg: format!("branch row has {} columns, expected at least 11", row.len()),
        });
    }
    Ok(BranchRecord {
        from_bus: int_field(row[0], "branch from bus", line)?,
        to_bus: int_field(row[1], "branch to bus", line)?,
        r: row[2],
        x: row[3],
        b_charging: row[4],
        tap: row[8],
        shift: row[9],
        status: if row[10] > 0.0 { Status::On } else { Status::Off },
    })
}

impl RawCase {
    pub fn validate(&self) -> Result<(), CaseError> {
        if !(self.base_mva > 0.0) || !self.base_mva.is_finite() {
            return Err(CaseError::Validation(format!("base_mva must be positive, got {}", self.base_mva)));
        }
        let mut ids = std::collections::BTreeSet::new();
        for b in &self.buses {
            if !ids.insert(b.id) {
                return Err(CaseError::Validation(format!("duplicate bus id {}", b.id)));
            }
            if !(b.v_mag_init > 0.0) {
                return Err(CaseError::Validation(format!("bus {}: v_mag_init must be positive", b.id)));
            }
            if b.v_min != 0.0 || b.v_max != 0.0 {
                if b.v_min > b.v_max {
                    return Err(CaseError::Validation(format!("bus {}: v_min > v_max", b.id)));
                }
                if b.v_min < 0.0 {
                    return Err(CaseError::Validation(format!("bus {}: v_min must be non-negative", b.id)));
                }
            }
        }
        let n_slack = self.buses.iter().filter(|b| b.btype == BusType::Slack).count();
        if n_slack != 1 {
            return Err(CaseError::Validation(format!("expected exactly one slack bus, found {n_slack}")));
        }
        for g in &self.gens {
            if !ids.contains(&g.bus) {
                return Err(CaseError::Validation(format!("gen references unknown bus {}", g.bus)));
            }
            if g.status == Status::On && !(g.v_set > 0.0) {
                return Err(CaseError::Validation(format!("gen at bus {}: v_set must be positive", g.bus)));
            }
        }
        for br in &self.branches {
            if !ids.contains(&br.from_bus) || !ids.contains(&br.to_bus) {
                return Err(CaseError::Validation(format!(
                    "branch {}-{} references unknown bus",
                    br.from_bus, br.to_bus
                )));
            }
            if br.status == Status::On && br.r * br.r + br.x * br.x == 0.0 {
                return Err(CaseError::Validation(format!(
                    "branch {}-{} has zero impedance",
                    br.from_bus, br.to_bus
                )));
            }
        }
        Ok(())
    }
}

/// Converts a validated [`RawCase`] to per-unit: powers divided by `base_mva`,
/// angles to radians, `tap=0` normalized to 1, out-of-service equipment
/// dropped, generators aggregated per bus, zero voltage bounds replaced by
/// [`DEFAULT_V_MIN`]/[`DEFAULT_V_MAX`].
pub fn to_per_unit(raw: &RawCase) -> Result<NetworkCase, CaseError> {
    raw.validate()?;
    let base = raw.base_mva;
    let deg = std::f64::consts::PI / 180.0;

    let buses: Vec<BusRecord> = raw
        .buses
        .iter()
        .map(|b| BusRecord {
            id: b.id,
            btype: b.btype,
            p_demand: b.p_demand / base,
            q_demand: b.q_demand / base,
            g_shunt: b.g_shunt / base,
            b_shunt: b.b_shunt / base,
            v_mag_init: b.v_mag_init,
            v_ang_init: b.v_ang_init * deg,
            base_kv: b.base_kv,
            v_max: if b.v_max == 0.0 { DEFAULT_V_MAX } else { b.v_max },
            v_min: if b.v_min == 0.0 { DEFAULT_V_MIN } else { b.v_min },
        })
        .collect();
    for b in &buses {
        if b.v_min > b.v_max || b.v_min <= 0.0 {
            return Err(CaseError::Validation(format!("bus {}: invalid voltage bounds after defaults", b.id)));
        }
    }

    let branches: Vec<BranchRecord> = raw
        .branches
        .iter()
        .filter(|br| br.status == Status::On)
        .map(|br| BranchRecord {
            from_bus: br.from_bus,
            to_bus: br.to_bus,
            r: br.r,
            x: br.x,
            b_charging: br.b_charging,
            tap: if br.tap == 0.0 { 1.0 } else { br.tap },
            shift: br.shift * deg,
            status: Status::On,
        })
        .collect();

    let mut by_bus: std::collections::BTreeMap<u32, GenRecord> = std::collections::BTreeMap::new();
    for g in raw.gens.iter().filter(|g| g.status == Status::On) {
        let entry = by_bus.entry(g.bus).or_insert(GenRecord {
            bus: g.bus,
            p_set: 0.0,
            q_init: 0.0,
            q_max: 0.0,
            q_min: 0.0,
            v_set: g.v_set,
            status: Status::On,
        });
        if (entry.v_set - g.v_set).abs() > 1e-6 {
            return Err(CaseError::Validation(format!(
                "bus {}: conflicting generator voltage setpoints {} and {}",
                g.bus, entry.v_set, g.v_set
            )));
        }
        entry.p_set += g.p_set / base;
        entry.q_init += g.q_init / base;
        entry.q_max += g.q_max / base;
        entry.q_min += g.q_min / base;
    }

    Ok(NetworkCase {
        name: raw.name.clone(),
        base_mva: raw.base_mva,
        buses,
        branches,
        gens: by_bus.into_values().collect(),
    })
}

impl NetworkCase {
    pub fn validate(&self) -> Result<(), CaseError> {
        let raw = RawCase {
            name: self.name.clone(),
            base_mva: self.base_mva,
            buses: self.buses.clone(),
            gens: self.gens.clone(),
            branches: self.branches.clone(),
        };
        raw.validate()?;
        for b in &self.buses {
            if !(b.v_min > 0.0) || b.v_min > b.v_max {
                return Err(CaseError::Validation(format!("bus {}: invalid voltage bounds", b.id)));
            }
        }
        Ok(())
    }

    /// Replaces the voltage bounds of every bus.
    pub fn with_bounds(&self, v_min: Option<f64>, v_max: Option<f64>) -> Result<NetworkCase, CaseError> {
        let mut out = self.clone();
        for b in &mut out.buses {
            if let Some(lo) = v_min {
                b.v_min = lo;
            }
            if let Some(hi) = v_max {
                b.v_max = hi;
            }
            if !(b.v_min > 0.0) || b.v_min > b.v_max {
                return Err(CaseError::Argument(format!(
                    "voltage bounds [{}, {}] are invalid",
                    b.v_min, b.v_max
                )));
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String, CaseError> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Parses and validates the canonical JSON format.
pub fn parse_json(text: &str) -> Result<NetworkCase, CaseError> {
    let case: NetworkCase = serde_json::from_str(text)?;
    case.validate()?;
    Ok(case)
}

/// Returns a copy with every bus demand multiplied by `factor`.
pub fn scale_load(case: &NetworkCase, factor: f64) -> Result<NetworkCase, CaseError> {
    if !factor.is_finite() || factor < 0.0 {
        return Err(CaseError::Argument(format!("load factor must be finite and >= 0, got {factor}")));
    }
    let mut out = case.clone();
    for b in &mut out.buses {
        b.p_demand *= factor;
        b.q_demand *= factor;
    }
    Ok(out)
}
