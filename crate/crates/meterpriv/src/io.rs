//! Trace CSV and tariff TOML files.
//!
//! Trace files have a header `slot,load_kw` optionally followed by
//! `res_kw` and any number of `app_<name>` columns. Slots must be
//! `0, 1, 2, ...` in order. The slot duration is not stored in the file.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use meterpriv_core::model::{ApplianceLoads, LoadTrace, PricePeriod, TariffSchedule};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

const APP_PREFIX: &str = "app_";

fn parse_err(path: &Path, line: u64, field: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Parse {
        path: path.to_path_buf(),
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::io(path, io),
        kind => parse_err(path, line, "", format!("{kind:?}")),
    }
}

pub fn read_trace(path: &Path, slot_hours: f64) -> Result<LoadTrace> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() < 2 || names[0] != "slot" || names[1] != "load_kw" {
        return Err(parse_err(path, 1, "header", "expected `slot,load_kw,...`"));
    }
    let has_res = names.get(2) == Some(&"res_kw");
    let app_start = if has_res { 3 } else { 2 };
    let mut app_names = Vec::new();
    for name in &names[app_start..] {
        match name.strip_prefix(APP_PREFIX) {
            Some(n) if !n.is_empty() => app_names.push(n.to_string()),
            _ => return Err(parse_err(path, 1, name, "unknown column")),
        }
    }

    let mut load = Vec::new();
    let mut res = Vec::new();
    let mut apps = vec![Vec::new(); app_names.len()];
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let num = |col: usize| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(path, line, names[col], format!("not a finite number: {raw:?}")))
        };
        let slot = record.get(0).unwrap_or("");
        if slot.parse::<usize>().ok() != Some(i) {
            return Err(parse_err(path, line, "slot", format!("expected {i}, found {slot:?}")));
        }
        load.push(num(1)?);
        if has_res {
            res.push(num(2)?);
        }
        for (a, col) in apps.iter_mut().enumerate() {
            col.push(num(app_start + a)?);
        }
    }

    let mut trace = LoadTrace::new(slot_hours, load)?;
    if has_res {
        trace = trace.with_res(res)?;
    }
    if !app_names.is_empty() {
        trace = trace.with_appliances(ApplianceLoads {
            names: app_names,
            columns: apps,
        })?;
    }
    Ok(trace)
}

pub fn write_trace(path: &Path, trace: &LoadTrace) -> Result<()> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["slot".to_string(), "load_kw".to_string()];
    if trace.res().is_some() {
        header.push("res_kw".into());
    }
    if let Some(app) = trace.appliances() {
        header.extend(app.names.iter().map(|n| format!("{APP_PREFIX}{n}")));
    }
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for t in 0..trace.len() {
        // `{}` prints the shortest string that parses back to the same f64.
        let mut row = vec![t.to_string(), trace.load()[t].to_string()];
        if let Some(res) = trace.res() {
            row.push(res[t].to_string());
        }
        if let Some(app) = trace.appliances() {
            row.extend(app.columns.iter().map(|c| c[t].to_string()));
        }
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TariffFile {
    period: Vec<PeriodRow>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PeriodRow {
    start_slot: usize,
    end_slot: usize,
    price: f64,
}

pub(crate) fn toml_err(path: &Path, text: &str, e: &toml::de::Error) -> HarnessError {
    let line = e.span().map_or(0, |s| text[..s.start].matches('\n').count() as u64 + 1);
    parse_err(path, line, "", e.message())
}

pub fn read_tariff(path: &Path) -> Result<TariffSchedule> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let file: TariffFile = toml::from_str(&text).map_err(|e| toml_err(path, &text, &e))?;
    let periods = file
        .period
        .into_iter()
        .map(|p| PricePeriod {
            start_slot: p.start_slot,
            end_slot: p.end_slot,
            price: p.price,
        })
        .collect();
    Ok(TariffSchedule::new(periods)?)
}

pub fn write_tariff(path: &Path, tariff: &TariffSchedule) -> Result<()> {
    let file = TariffFile {
        period: tariff
            .periods()
            .iter()
            .map(|p| PeriodRow {
                start_slot: p.start_slot,
                end_slot: p.end_slot,
                price: p.price,
            })
            .collect(),
    };
    let text = toml::to_string(&file).map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut f = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| HarnessError::io(path, e))
}
