//! File formats: edge lists, label files, score files, and report/curve
//! emission.
//!
//! Edge lists are plain text, one `source<TAB>target` pair per line, with
//! `#` comment lines ignored (the layout of common public graph dumps).
//! Label files pair a node id with `0` or `1` (1 = protected). Node ids in
//! files are arbitrary `u64`s; ingestion remaps them onto dense indices in
//! ascending id order and keeps the mapping for output.
//!
//! CSV floats are printed with 17 significant digits so values round-trip
//! exactly; JSON uses the shortest representation that round-trips.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde_json::{json, Map, Number, Value};

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, Group, GroupAssignment};
use crate::metrics::{ClassMeanPoint, ComparisonReport, DegreeBinPoint};
use crate::score::SolverReport;
use crate::synth::SynthMeta;

/// Output encoding for score, report, and curve files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidParameter(format!(
                "unknown output format `{other}` (expected csv or json)"
            ))),
        }
    }
}

/// 17-significant-digit float form used in CSV output.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Reads a `source<TAB>target` edge list; `#` lines and blank lines are
/// skipped, any whitespace separates the two ids.
pub fn read_edge_list(path: &Path) -> Result<Vec<(u64, u64)>> {
    let text = fs::read_to_string(path)?;
    let mut edges = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let source = parts
            .next()
            .and_then(|t| t.parse::<u64>().ok())
            .ok_or_else(|| parse_error(path, idx + 1, "expected `source target`"))?;
        let target = parts
            .next()
            .and_then(|t| t.parse::<u64>().ok())
            .ok_or_else(|| parse_error(path, idx + 1, "expected `source target`"))?;
        if parts.next().is_some() {
            return Err(parse_error(path, idx + 1, "trailing tokens after edge"));
        }
        edges.push((source, target));
    }
    Ok(edges)
}

/// Reads a `node_id<TAB>{0|1}` label file (1 = protected). Duplicate ids
/// are rejected.
pub fn read_label_file(path: &Path) -> Result<Vec<(u64, Group)>> {
    let text = fs::read_to_string(path)?;
    let mut labels: Vec<(u64, Group)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let node = parts
            .next()
            .and_then(|t| t.parse::<u64>().ok())
            .ok_or_else(|| parse_error(path, idx + 1, "expected `node label`"))?;
        let group = match parts.next() {
            Some("0") => Group::Unprotected,
            Some("1") => Group::Protected,
            _ => return Err(parse_error(path, idx + 1, "label must be 0 or 1")),
        };
        if parts.next().is_some() {
            return Err(parse_error(path, idx + 1, "trailing tokens after label"));
        }
        labels.push((node, group));
    }
    labels.sort_unstable_by_key(|&(id, _)| id);
    for w in labels.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::InvalidParameter(format!(
                "node {} labeled more than once",
                w[0].0
            )));
        }
    }
    Ok(labels)
}

/// A loaded graph with its labels and the dense-to-original id mapping.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: DirectedGraph,
    pub groups: GroupAssignment,
    /// Original node id per dense index, ascending.
    pub node_ids: Vec<u64>,
}

/// Builds a dataset from raw edges and labels. The label file defines the
/// node universe: every edge endpoint must be labeled (isolated labeled
/// nodes are fine).
pub fn assemble_dataset(
    edges: &[(u64, u64)],
    labels: &[(u64, Group)],
    dedup: bool,
) -> Result<Dataset> {
    let mut sorted: Vec<(u64, Group)> = labels.to_vec();
    sorted.sort_unstable_by_key(|&(id, _)| id);
    let node_ids: Vec<u64> = sorted.iter().map(|&(id, _)| id).collect();
    let dense = |id: u64| -> Result<u32> {
        node_ids
            .binary_search(&id)
            .map(|i| i as u32)
            .map_err(|_| Error::MissingLabel { node: id })
    };
    let mut dense_edges = Vec::with_capacity(edges.len());
    for &(s, t) in edges {
        dense_edges.push((dense(s)?, dense(t)?));
    }
    if node_ids.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let graph = DirectedGraph::from_edges(node_ids.len(), &dense_edges, dedup)?;
    let groups = GroupAssignment::new(&graph, sorted.into_iter().map(|(_, g)| g).collect())?;
    Ok(Dataset {
        graph,
        groups,
        node_ids,
    })
}

/// Reads and assembles an edge list + label file pair.
pub fn load_dataset(edges_path: &Path, labels_path: &Path, dedup: bool) -> Result<Dataset> {
    let edges = read_edge_list(edges_path)?;
    let labels = read_label_file(labels_path)?;
    assemble_dataset(&edges, &labels, dedup)
}

/// Writes the edge list in the ingestion format. `ids` maps dense indices
/// back to original ids (dense ids are written when absent).
pub fn write_edge_list(path: &Path, graph: &DirectedGraph, ids: Option<&[u64]>) -> Result<()> {
    let mut out = String::new();
    for (s, t) in graph.edges() {
        let (s, t) = match ids {
            Some(map) => (map[s as usize], map[t as usize]),
            None => (s as u64, t as u64),
        };
        out.push_str(&format!("{s}\t{t}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes the label file in the ingestion format.
pub fn write_label_file(
    path: &Path,
    groups: &GroupAssignment,
    ids: Option<&[u64]>,
) -> Result<()> {
    let mut out = String::new();
    for u in 0..groups.node_count() {
        let id = match ids {
            Some(map) => map[u],
            None => u as u64,
        };
        out.push_str(&format!("{id}\t{}\n", groups.label(u).as_u8()));
    }
    fs::write(path, out)?;
    Ok(())
}

/// One row of a score file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub node_id: u64,
    pub k_in: u32,
    pub k_out: u32,
    pub group: Group,
    pub score: f64,
}

/// Assembles score records in dense-index order.
pub fn score_records(
    graph: &DirectedGraph,
    groups: &GroupAssignment,
    ids: Option<&[u64]>,
    scores: &[f64],
) -> Vec<ScoreRecord> {
    assert_eq!(scores.len(), graph.node_count());
    (0..graph.node_count())
        .map(|u| ScoreRecord {
            node_id: ids.map_or(u as u64, |map| map[u]),
            k_in: graph.in_degree(u) as u32,
            k_out: graph.out_degree(u) as u32,
            group: groups.label(u),
            score: scores[u],
        })
        .collect()
}

pub fn write_scores(path: &Path, records: &[ScoreRecord], format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut out = String::from("node_id,k_in,k_out,group,score\n");
            for r in records {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.node_id,
                    r.k_in,
                    r.k_out,
                    r.group.as_u8(),
                    format_float(r.score)
                ));
            }
            fs::write(path, out)?;
        }
        OutputFormat::Json => {
            let rows: Vec<Value> = records
                .iter()
                .map(|r| {
                    json!({
                        "node_id": r.node_id,
                        "k_in": r.k_in,
                        "k_out": r.k_out,
                        "group": r.group.as_u8(),
                        "score": r.score,
                    })
                })
                .collect();
            write_json(path, &Value::Array(rows))?;
        }
    }
    Ok(())
}

/// Reads a score file, auto-detecting CSV or JSON.
pub fn read_scores(path: &Path) -> Result<Vec<ScoreRecord>> {
    let text = fs::read_to_string(path)?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        let rows: Vec<Value> = serde_json::from_str(trimmed)
            .map_err(|e| parse_error(path, 1, format!("invalid JSON: {e}")))?;
        let mut records = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let field = |name: &str| -> Result<&Value> {
                row.get(name)
                    .ok_or_else(|| parse_error(path, i + 1, format!("missing field `{name}`")))
            };
            let as_u64 = |name: &str| -> Result<u64> {
                field(name)?
                    .as_u64()
                    .ok_or_else(|| parse_error(path, i + 1, format!("`{name}` not an integer")))
            };
            let score = field("score")?
                .as_f64()
                .ok_or_else(|| parse_error(path, i + 1, "`score` not a number"))?;
            records.push(ScoreRecord {
                node_id: as_u64("node_id")?,
                k_in: as_u64("k_in")? as u32,
                k_out: as_u64("k_out")? as u32,
                group: if as_u64("group")? == 1 {
                    Group::Protected
                } else {
                    Group::Unprotected
                },
                score,
            });
        }
        return Ok(records);
    }

    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "node_id,k_in,k_out,group,score" => {}
        _ => return Err(parse_error(path, 1, "missing score header")),
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(parse_error(path, idx + 1, "expected 5 fields"));
        }
        let fail = |what: &str| parse_error(path, idx + 1, format!("invalid {what}"));
        records.push(ScoreRecord {
            node_id: fields[0].parse().map_err(|_| fail("node_id"))?,
            k_in: fields[1].parse().map_err(|_| fail("k_in"))?,
            k_out: fields[2].parse().map_err(|_| fail("k_out"))?,
            group: match fields[3] {
                "0" => Group::Unprotected,
                "1" => Group::Protected,
                _ => return Err(fail("group")),
            },
            score: fields[4].parse().map_err(|_| fail("score"))?,
        });
    }
    Ok(records)
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut file = fs::File::create(path)?;
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidParameter(format!("json serialization failed: {e}")))?;
    file.write_all(text.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}

fn opt_float_csv(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

fn opt_float_json(x: Option<f64>) -> Value {
    match x.and_then(Number::from_f64) {
        Some(n) => Value::Number(n),
        None => Value::Null,
    }
}

/// Writes a solver run report as a flat record (residual history omitted).
pub fn write_solver_report(
    path: &Path,
    method: &str,
    report: &SolverReport,
    format: OutputFormat,
) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let header = "method,outer_iterations,inner_iterations_total,final_residual,\
                          achieved_protected_mass,wall_time_seconds,matvec_count\n";
            let row = format!(
                "{},{},{},{},{},{},{}\n",
                method,
                report.outer_iterations,
                report.inner_iterations_total,
                format_float(report.final_residual),
                opt_float_csv(report.achieved_protected_mass),
                format_float(report.wall_time_seconds),
                report.matvec_count
            );
            fs::write(path, format!("{header}{row}"))?;
        }
        OutputFormat::Json => {
            write_json(
                path,
                &json!({
                    "method": method,
                    "outer_iterations": report.outer_iterations,
                    "inner_iterations_total": report.inner_iterations_total,
                    "final_residual": report.final_residual,
                    "achieved_protected_mass": opt_float_json(report.achieved_protected_mass),
                    "wall_time_seconds": report.wall_time_seconds,
                    "matvec_count": report.matvec_count,
                }),
            )?;
        }
    }
    Ok(())
}

/// Writes a comparison report as a flat key-value record. `extras` are
/// appended after the standard keys (e.g. score-vs-degree correlations).
pub fn write_comparison(
    path: &Path,
    report: &ComparisonReport,
    extras: &[(String, f64)],
    format: OutputFormat,
) -> Result<()> {
    let mut kv = report.key_values();
    kv.extend(extras.iter().cloned());
    match format {
        OutputFormat::Csv => {
            let header: Vec<&str> = kv.iter().map(|(k, _)| k.as_str()).collect();
            let values: Vec<String> = kv.iter().map(|&(_, v)| format_float(v)).collect();
            fs::write(
                path,
                format!("{}\n{}\n", header.join(","), values.join(",")),
            )?;
        }
        OutputFormat::Json => {
            let mut map = Map::new();
            for (k, v) in kv {
                map.insert(k, opt_float_json(Some(v)));
            }
            write_json(path, &Value::Object(map))?;
        }
    }
    Ok(())
}

pub fn write_class_mean_curve(
    path: &Path,
    points: &[ClassMeanPoint],
    format: OutputFormat,
) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut out = String::from("k_in,k_out,group,count,baseline_mean,approx_mean\n");
            for p in points {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    p.k_in,
                    p.k_out,
                    p.group.as_u8(),
                    p.count,
                    format_float(p.baseline_mean),
                    format_float(p.approx_mean)
                ));
            }
            fs::write(path, out)?;
        }
        OutputFormat::Json => {
            let rows: Vec<Value> = points
                .iter()
                .map(|p| {
                    json!({
                        "k_in": p.k_in,
                        "k_out": p.k_out,
                        "group": p.group.as_u8(),
                        "count": p.count,
                        "baseline_mean": p.baseline_mean,
                        "approx_mean": p.approx_mean,
                    })
                })
                .collect();
            write_json(path, &Value::Array(rows))?;
        }
    }
    Ok(())
}

/// Writes a binned degree curve; `empirical_label` names the statistic
/// column pair (e.g. `mean` or `cv`).
pub fn write_degree_curve(
    path: &Path,
    points: &[DegreeBinPoint],
    empirical_label: &str,
    format: OutputFormat,
) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut out = format!(
                "group,bin_lo,bin_hi,bin_center,count,empirical_{empirical_label},\
                 spread,predicted_{empirical_label}\n"
            );
            for p in points {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    p.group.as_u8(),
                    format_float(p.bin_lo),
                    format_float(p.bin_hi),
                    format_float(p.bin_center),
                    p.count,
                    format_float(p.empirical),
                    format_float(p.spread),
                    format_float(p.predicted)
                ));
            }
            fs::write(path, out)?;
        }
        OutputFormat::Json => {
            let rows: Vec<Value> = points
                .iter()
                .map(|p| {
                    let mut map = Map::new();
                    map.insert("group".into(), json!(p.group.as_u8()));
                    map.insert("bin_lo".into(), json!(p.bin_lo));
                    map.insert("bin_hi".into(), json!(p.bin_hi));
                    map.insert("bin_center".into(), json!(p.bin_center));
                    map.insert("count".into(), json!(p.count));
                    map.insert(format!("empirical_{empirical_label}"), json!(p.empirical));
                    map.insert("spread".into(), json!(p.spread));
                    map.insert(format!("predicted_{empirical_label}"), json!(p.predicted));
                    Value::Object(map)
                })
                .collect();
            write_json(path, &Value::Array(rows))?;
        }
    }
    Ok(())
}

/// One row of the benchmark table.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub label: String,
    pub nodes: usize,
    pub edges: usize,
    pub method: String,
    /// `ok`, `CAP` (above the dense cap), or an error message.
    pub status: String,
    pub wall_time_seconds: Option<f64>,
}

pub fn write_bench_table(path: &Path, rows: &[BenchRow], format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut out = String::from("graph,nodes,edges,method,status,wall_time_seconds\n");
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.label,
                    r.nodes,
                    r.edges,
                    r.method,
                    r.status,
                    opt_float_csv(r.wall_time_seconds)
                ));
            }
            fs::write(path, out)?;
        }
        OutputFormat::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "graph": r.label,
                        "nodes": r.nodes,
                        "edges": r.edges,
                        "method": r.method,
                        "status": r.status,
                        "wall_time_seconds": opt_float_json(r.wall_time_seconds),
                    })
                })
                .collect();
            write_json(path, &Value::Array(rows))?;
        }
    }
    Ok(())
}

/// Writes generator metadata (balance repair and rewiring log).
pub fn write_synth_meta(path: &Path, meta: &SynthMeta) -> Result<()> {
    write_json(
        path,
        &json!({
            "sampled_in_sum": meta.sampled_in_sum,
            "sampled_out_sum": meta.sampled_out_sum,
            "trimmed_in_stubs": meta.trimmed_in_stubs,
            "trimmed_out_stubs": meta.trimmed_out_stubs,
            "rewired_edges": meta.rewired_edges,
            "realized_protected": meta.realized_protected,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Group::{Protected, Unprotected};

    #[test]
    fn edge_and_label_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let edges_path = dir.path().join("edges.tsv");
        let labels_path = dir.path().join("labels.tsv");
        fs::write(&edges_path, "# comment\n10\t20\n20\t10\n30\t10\n").unwrap();
        fs::write(&labels_path, "10\t1\n20\t0\n30\t0\n40\t1\n").unwrap();

        let ds = load_dataset(&edges_path, &labels_path, false).unwrap();
        assert_eq!(ds.graph.node_count(), 4);
        assert_eq!(ds.graph.edge_count(), 3);
        assert_eq!(ds.node_ids, vec![10, 20, 30, 40]);
        assert_eq!(ds.groups.label(0), Protected);
        assert_eq!(ds.groups.label(3), Protected);
        // Node 40 is isolated but labeled: fine.
        assert_eq!(ds.graph.in_degree(3) + ds.graph.out_degree(3), 0);

        // Unlabeled edge endpoint is an error.
        fs::write(&edges_path, "10\t99\n").unwrap();
        assert!(matches!(
            load_dataset(&edges_path, &labels_path, false),
            Err(Error::MissingLabel { node: 99 })
        ));
    }

    #[test]
    fn malformed_lines_carry_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edges.tsv");
        fs::write(&path, "1\t2\nbogus\n").unwrap();
        match read_edge_list(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn score_files_round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![
            ScoreRecord {
                node_id: 7,
                k_in: 2,
                k_out: 1,
                group: Protected,
                score: 0.12345678901234567,
            },
            ScoreRecord {
                node_id: 9,
                k_in: 0,
                k_out: 3,
                group: Unprotected,
                score: 1.0 / 3.0,
            },
        ];
        for format in [OutputFormat::Csv, OutputFormat::Json] {
            let path = dir.path().join(format!("scores.{}", format.extension()));
            write_scores(&path, &records, format).unwrap();
            let back = read_scores(&path).unwrap();
            assert_eq!(back, records, "round trip via {format:?}");
        }
    }

    #[test]
    fn float_formatting_round_trips() {
        for &x in &[1.0 / 3.0, 1e-17, 0.1 + 0.2, 6.02e23] {
            let s = format_float(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, x, "{s}");
        }
    }
}
