//! Network topology, measurement sets and meter weights.
//!
//! Buses are stored densely as indices `0..n`; the original labels from the
//! case file are kept alongside so reports and re-serialization can use them.
//! A bus index `b` corresponds to column `b` of the measurement Jacobian.

use std::collections::HashMap;
use std::fmt;

use serde::Deserialize;
use thiserror::Error;

/// Errors raised while loading a case file.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum CaseError {
    #[error("malformed case file at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: case has no buses")]
    NoBuses { field: String },
    #[error("{field}: bus label {label} listed more than once")]
    DuplicateBus { field: String, label: i64 },
    #[error("{field}: reference to unknown bus {label}")]
    DanglingBus { field: String, label: i64 },
    #[error("{field}: reference to unknown line {index} (case has {count} lines)")]
    DanglingLine {
        field: String,
        index: usize,
        count: usize,
    },
    #[error("{field}: self-loop on bus {label}")]
    SelfLoop { field: String, label: i64 },
    #[error("lines: network is disconnected ({components} components, bus {label} unreachable from bus {root})")]
    Disconnected {
        components: usize,
        root: i64,
        label: i64,
    },
    #[error("measurements: measurement set is empty")]
    EmptyMeasurements,
}

/// An undirected transmission line between two distinct buses.
///
/// The endpoint order is the order given in the case file and fixes the
/// sign convention of the line's flow row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Line {
    pub from: usize,
    pub to: usize,
}

impl Line {
    pub fn touches(&self, bus: usize) -> bool {
        self.from == bus || self.to == bus
    }

    /// The endpoint opposite to `bus`. Only meaningful when `touches(bus)`.
    pub fn other(&self, bus: usize) -> usize {
        if self.from == bus {
            self.to
        } else {
            self.from
        }
    }
}

/// Immutable bus/line graph. Parallel lines are distinct entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    name: String,
    labels: Vec<i64>,
    lines: Vec<Line>,
    incidence: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Measurement {
    /// Power flow meter on the line with this index.
    Flow { line: usize },
    /// Power injection meter on the bus with this (dense) index.
    Injection { bus: usize },
}

/// Ordered measurement list; entry `k` is row `k` of the Jacobian.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementSet {
    entries: Vec<Measurement>,
}

/// Meter multiplicities per line (`w`) and bus (`v`), and the modified line
/// weights `wtilde = w + v(from) + v(to)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeterWeights {
    pub w: Vec<u64>,
    pub v: Vec<u64>,
    pub wtilde: Vec<u64>,
}

/// A validated network together with its measurement set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Case {
    pub network: Network,
    pub measurements: MeasurementSet,
}

impl Network {
    /// Builds a network from dense endpoints. Used by generators and tests;
    /// labels default to `1..=n`.
    pub fn new(name: impl Into<String>, n: usize, lines: Vec<(usize, usize)>) -> Result<Self, CaseError> {
        let labels: Vec<i64> = (1..=n as i64).collect();
        Self::with_labels(name.into(), labels, lines)
    }

    fn with_labels(name: String, labels: Vec<i64>, lines: Vec<(usize, usize)>) -> Result<Self, CaseError> {
        if labels.is_empty() {
            return Err(CaseError::NoBuses {
                field: "buses".into(),
            });
        }
        let n = labels.len();
        let mut incidence = vec![Vec::new(); n];
        let mut out = Vec::with_capacity(lines.len());
        for (k, &(a, b)) in lines.iter().enumerate() {
            for end in [a, b] {
                if end >= n {
                    return Err(CaseError::DanglingBus {
                        field: format!("lines[{k}]"),
                        label: end as i64 + 1,
                    });
                }
            }
            if a == b {
                return Err(CaseError::SelfLoop {
                    field: format!("lines[{k}]"),
                    label: labels[a],
                });
            }
            incidence[a].push(k);
            incidence[b].push(k);
            out.push(Line { from: a, to: b });
        }
        let net = Network {
            name,
            labels,
            lines: out,
            incidence,
        };
        net.check_connected()?;
        Ok(net)
    }

    fn check_connected(&self) -> Result<(), CaseError> {
        let comps = self.component_labels();
        let count = comps.iter().copied().max().map_or(0, |c| c + 1);
        if count > 1 {
            let unreachable = comps.iter().position(|&c| c != 0).unwrap_or(0);
            return Err(CaseError::Disconnected {
                components: count,
                root: self.labels[0],
                label: self.labels[unreachable],
            });
        }
        Ok(())
    }

    fn component_labels(&self) -> Vec<usize> {
        let n = self.bus_count();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for root in 0..n {
            if comp[root] != usize::MAX {
                continue;
            }
            comp[root] = next;
            stack.push(root);
            while let Some(b) = stack.pop() {
                for &k in &self.incidence[b] {
                    let o = self.lines[k].other(b);
                    if comp[o] == usize::MAX {
                        comp[o] = next;
                        stack.push(o);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bus_count(&self) -> usize {
        self.labels.len()
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn line(&self, k: usize) -> Line {
        self.lines[k]
    }

    /// Original label of a dense bus index.
    pub fn bus_label(&self, bus: usize) -> i64 {
        self.labels[bus]
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    /// Dense index of an original bus label.
    pub fn bus_index(&self, label: i64) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    /// Lines incident to `bus`, in file order.
    pub fn incident_lines(&self, bus: usize) -> Result<&[usize], UnknownBus> {
        self.incidence
            .get(bus)
            .map(Vec::as_slice)
            .ok_or(UnknownBus(bus))
    }

    pub fn degree(&self, bus: usize) -> usize {
        self.incidence[bus].len()
    }

    /// Distinct neighbours of `bus`, ordered by first incident line.
    pub fn neighbors(&self, bus: usize) -> Vec<usize> {
        let mut seen = Vec::new();
        for &k in &self.incidence[bus] {
            let o = self.lines[k].other(bus);
            if !seen.contains(&o) {
                seen.push(o);
            }
        }
        seen
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("unknown bus index {0}")]
pub struct UnknownBus(pub usize);

impl MeasurementSet {
    pub fn new(net: &Network, entries: Vec<Measurement>) -> Result<Self, CaseError> {
        if entries.is_empty() {
            return Err(CaseError::EmptyMeasurements);
        }
        for (k, m) in entries.iter().enumerate() {
            match *m {
                Measurement::Flow { line } if line >= net.lines.len() => {
                    return Err(CaseError::DanglingLine {
                        field: format!("measurements[{k}].line"),
                        index: line,
                        count: net.lines.len(),
                    })
                }
                Measurement::Injection { bus } if bus >= net.bus_count() => {
                    return Err(CaseError::DanglingBus {
                        field: format!("measurements[{k}].bus"),
                        label: bus as i64 + 1,
                    })
                }
                _ => {}
            }
        }
        Ok(MeasurementSet { entries })
    }

    /// Every line metered `meters_per_line` times, optionally plus one
    /// injection meter per bus. Injections come first, in bus order.
    pub fn full(net: &Network, meters_per_line: usize, injections: bool) -> Self {
        let mut entries = Vec::new();
        if injections {
            entries.extend((0..net.bus_count()).map(|bus| Measurement::Injection { bus }));
        }
        for line in 0..net.lines.len() {
            entries.extend(std::iter::repeat_n(Measurement::Flow { line }, meters_per_line));
        }
        MeasurementSet { entries }
    }

    pub fn entries(&self) -> &[Measurement] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, row: usize) -> Option<Measurement> {
        self.entries.get(row).copied()
    }

    /// Keeps only the rows for which `keep` returns true.
    pub fn retain_rows(&self, mut keep: impl FnMut(usize, &Measurement) -> bool) -> Vec<Measurement> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(k, m)| keep(*k, m))
            .map(|(_, m)| *m)
            .collect()
    }

    /// Human-readable description of a row, using original bus labels.
    pub fn describe(&self, net: &Network, row: usize) -> String {
        match self.entries[row] {
            Measurement::Flow { line } => {
                let l = net.line(line);
                format!("flow {}-{} (line {})", net.bus_label(l.from), net.bus_label(l.to), line)
            }
            Measurement::Injection { bus } => format!("injection {}", net.bus_label(bus)),
        }
    }
}

/// Meter multiplicities derived from a measurement set.
pub fn meter_weights(net: &Network, ms: &MeasurementSet) -> MeterWeights {
    let mut w = vec![0u64; net.lines.len()];
    let mut v = vec![0u64; net.bus_count()];
    for m in &ms.entries {
        match *m {
            Measurement::Flow { line } => w[line] += 1,
            Measurement::Injection { bus } => v[bus] += 1,
        }
    }
    let wtilde = net
        .lines
        .iter()
        .zip(&w)
        .map(|(l, &wl)| wl + v[l.from] + v[l.to])
        .collect();
    MeterWeights { w, v, wtilde }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    name: String,
    buses: Vec<i64>,
    lines: Vec<[i64; 2]>,
    measurements: Vec<RawMeasurement>,
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum RawMeasurement {
    Flow { line: usize },
    Injection { bus: i64 },
}

/// Parses and validates a JSON case file.
pub fn parse_case(text: &str) -> Result<Case, CaseError> {
    let raw: RawCase = serde_json::from_str(text).map_err(|e| CaseError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    if raw.buses.is_empty() {
        return Err(CaseError::NoBuses {
            field: "buses".into(),
        });
    }
    let mut index: HashMap<i64, usize> = HashMap::with_capacity(raw.buses.len());
    for (k, &label) in raw.buses.iter().enumerate() {
        if index.insert(label, k).is_some() {
            return Err(CaseError::DuplicateBus {
                field: format!("buses[{k}]"),
                label,
            });
        }
    }
    let lookup = |label: i64, field: String| -> Result<usize, CaseError> {
        index
            .get(&label)
            .copied()
            .ok_or(CaseError::DanglingBus { field, label })
    };

    let mut lines = Vec::with_capacity(raw.lines.len());
    for (k, [a, b]) in raw.lines.iter().copied().enumerate() {
        let from = lookup(a, format!("lines[{k}][0]"))?;
        let to = lookup(b, format!("lines[{k}][1]"))?;
        if from == to {
            return Err(CaseError::SelfLoop {
                field: format!("lines[{k}]"),
                label: a,
            });
        }
        lines.push((from, to));
    }

    let line_count = lines.len();
    let mut entries = Vec::with_capacity(raw.measurements.len());
    for (k, m) in raw.measurements.iter().enumerate() {
        entries.push(match *m {
            RawMeasurement::Flow { line } => {
                if line >= line_count {
                    return Err(CaseError::DanglingLine {
                        field: format!("measurements[{k}].line"),
                        index: line,
                        count: line_count,
                    });
                }
                Measurement::Flow { line }
            }
            RawMeasurement::Injection { bus } => Measurement::Injection {
                bus: lookup(bus, format!("measurements[{k}].bus"))?,
            },
        });
    }
    if entries.is_empty() {
        return Err(CaseError::EmptyMeasurements);
    }

    let network = Network::with_labels(raw.name, raw.buses, lines)?;
    Ok(Case {
        network,
        measurements: MeasurementSet { entries },
    })
}

impl Case {
    pub fn new(network: Network, measurements: MeasurementSet) -> Self {
        Case {
            network,
            measurements,
        }
    }

    /// Same network with a different measurement list.
    pub fn with_measurements(&self, entries: Vec<Measurement>) -> Result<Case, CaseError> {
        let measurements = MeasurementSet::new(&self.network, entries)?;
        Ok(Case {
            network: self.network.clone(),
            measurements,
        })
    }

    pub fn weights(&self) -> MeterWeights {
        meter_weights(&self.network, &self.measurements)
    }

    /// Canonical serialization: keys in schema order, one line per line entry
    /// and per measurement.
    pub fn to_json(&self) -> String {
        let net = &self.network;
        let mut out = String::from("{\n");
        out.push_str(&format!(
            "  \"name\": {},\n",
            serde_json::to_string(&net.name).expect("string serializes")
        ));
        let buses: Vec<String> = net.labels.iter().map(i64::to_string).collect();
        out.push_str(&format!("  \"buses\": [{}],\n", buses.join(", ")));
        out.push_str("  \"lines\": [");
        push_items(
            &mut out,
            net.lines
                .iter()
                .map(|l| format!("[{}, {}]", net.bus_label(l.from), net.bus_label(l.to))),
        );
        out.push_str("],\n  \"measurements\": [");
        push_items(
            &mut out,
            self.measurements.entries.iter().map(|m| match *m {
                Measurement::Flow { line } => format!("{{\"type\": \"flow\", \"line\": {line}}}"),
                Measurement::Injection { bus } => {
                    format!("{{\"type\": \"injection\", \"bus\": {}}}", net.bus_label(bus))
                }
            }),
        );
        out.push_str("]\n}\n");
        out
    }
}

fn push_items(out: &mut String, items: impl Iterator<Item = String>) {
    let items: Vec<String> = items.collect();
    if items.is_empty() {
        return;
    }
    out.push('\n');
    for (k, item) in items.iter().enumerate() {
        out.push_str("    ");
        out.push_str(item);
        if k + 1 < items.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("  ");
}

impl fmt::Display for Measurement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measurement::Flow { line } => write!(f, "flow(line {line})"),
            Measurement::Injection { bus } => write!(f, "injection(bus #{bus})"),
        }
    }
}
