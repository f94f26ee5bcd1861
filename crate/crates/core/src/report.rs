//! CSV output: comma separated, LF line endings, a header row per table and
//! reals in shortest round-trip form.

use csv::{Terminator, WriterBuilder};

use crate::error::PipelineError;
use crate::pipeline::{ComparisonLevel, RunReport};

fn table(
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<String, PipelineError> {
    let mut w = WriterBuilder::new()
        .terminator(Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let report = |e: csv::Error| PipelineError::Report(e.to_string());
    w.write_record(header).map_err(report)?;
    for row in rows {
        w.write_record(&row).map_err(report)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| PipelineError::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| PipelineError::Report(e.to_string()))
}

fn real(x: f64) -> String {
    format!("{x}")
}

fn flag(ok: bool) -> String {
    if ok { "ok" } else { "violated" }.to_owned()
}

/// Sectioned report: `[summary]`, `[groups]`, `[resources]`, `[rejected]`,
/// each followed by a CSV table and separated by a blank line.
pub fn run_report_csv(report: &RunReport) -> Result<String, PipelineError> {
    let m = &report.metrics;
    let summary = table(
        &[
            "algorithm",
            "jobs",
            "groups",
            "rejected",
            "passes",
            "total_processing_s",
            "makespan_s",
            "mean_utilization",
        ],
        [vec![
            report.algorithm.to_string(),
            report.jobs.len().to_string(),
            report.groups.len().to_string(),
            report.rejected.len().to_string(),
            report.passes.to_string(),
            real(m.total_processing_s),
            real(m.makespan_s),
            real(m.mean_utilization()),
        ]],
    )?;

    let groups = table(
        &[
            "group_id",
            "resource_id",
            "cluster_id",
            "decided_by",
            "members",
            "total_mi",
            "total_memory_mb",
            "overhead_s",
            "transfer_s",
            "compute_s",
            "start_s",
            "finish_s",
            "cond_mi",
            "cond_memory",
            "cond_transfer",
        ],
        report.groups.iter().map(|g| {
            let t = m.per_group[&g.group.group_id];
            let members: Vec<String> = g.group.members().iter().map(ToString::to_string).collect();
            vec![
                g.group.group_id.to_string(),
                g.assignment.resource_id.to_string(),
                g.assignment.cluster_id.to_string(),
                g.assignment.decided_by.to_string(),
                members.join(";"),
                real(g.group.total_mi()),
                real(g.group.total_memory_mb()),
                real(t.overhead_s),
                real(t.transfer_s),
                real(t.compute_s),
                real(t.start_s),
                real(t.finish_s),
                flag(g.conditions.mi_capacity),
                flag(g.conditions.memory),
                flag(g.conditions.transfer),
            ]
        }),
    )?;

    let resources = table(
        &[
            "resource_id",
            "mips",
            "bandwidth_mbps",
            "memory_mb",
            "groups",
            "busy_s",
            "utilization",
        ],
        report.resources.iter().map(|r| {
            let count = report
                .groups
                .iter()
                .filter(|g| g.assignment.resource_id == r.resource_id)
                .count();
            vec![
                r.resource_id.to_string(),
                real(r.mips),
                real(r.bandwidth_mbps),
                real(r.memory_mb),
                count.to_string(),
                real(m.per_resource.get(&r.resource_id).copied().unwrap_or(0.0)),
                real(m.utilization.get(&r.resource_id).copied().unwrap_or(0.0)),
            ]
        }),
    )?;

    let rejected = table(
        &["job_id", "user", "reason"],
        report
            .rejected
            .iter()
            .map(|r| vec![r.job_id.to_string(), r.user.clone(), r.reason.to_string()]),
    )?;

    Ok(format!(
        "[summary]\n{summary}\n[groups]\n{groups}\n[resources]\n{resources}\n[rejected]\n{rejected}"
    ))
}

pub fn comparison_csv(levels: &[ComparisonLevel]) -> Result<String, PipelineError> {
    table(
        &[
            "jobs",
            "srjm_total_s",
            "djgb_total_s",
            "srjm_makespan_s",
            "djgb_makespan_s",
            "srjm_mean_util",
            "djgb_mean_util",
        ],
        levels.iter().map(|l| {
            vec![
                l.jobs.to_string(),
                real(l.srjm.total_processing_s),
                real(l.djg.total_processing_s),
                real(l.srjm.makespan_s),
                real(l.djg.makespan_s),
                real(l.srjm.mean_utilization),
                real(l.djg.mean_utilization),
            ]
        }),
    )
}
