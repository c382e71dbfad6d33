//! Deterministic table exports.

use std::str::FromStr;

use serde_json::{json, Map, Value};

use super::DecisionSpace;
use crate::extraction::OptionSource;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Csv,
    Markdown,
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "md" | "markdown" => Ok(Self::Markdown),
            other => Err(format!("unknown export format {other:?}")),
        }
    }
}

impl ExportFormat {
    pub fn content_type(self) -> &'static str {
        match self {
            Self::Json => "application/json",
            Self::Csv => "text/csv",
            Self::Markdown => "text/markdown",
        }
    }
}

/// Rebuilds every object with keys inserted in sorted order, so output is
/// sorted whichever map backs `serde_json::Value`.
pub(crate) fn sort_keys(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sort_keys(v))).collect::<Map<_, _>>())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("export types serialize")
}

pub fn export_json_value(space: &DecisionSpace, revision: u64) -> Value {
    let ranked = space.ranked_groups();
    let groups: Vec<Value> = space
        .groups
        .iter()
        .map(|g| {
            json!({
                "group_id": g.group_id,
                "label": g.label,
                "pinned_label_manual": g.pinned_label_manual,
                "member_criterion_ids": g.member_criterion_ids,
                "score": space.ranking.score(&g.group_id),
                "pinned": space.ranking.is_pinned(&g.group_id),
                "rank": ranked.iter().position(|r| r == &g.group_id),
                "overlooked": to_value(&space.overlooked.get(&g.group_id).cloned().unwrap_or_default()),
            })
        })
        .collect();
    let options: Vec<Value> = space
        .options
        .iter()
        .map(|o| {
            let mut v = to_value(o);
            v["placeholder"] = Value::Bool(o.sources.iter().all(|s| *s == OptionSource::Placeholder));
            v
        })
        .collect();
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "revision": revision,
        "options": options,
        "criteria": to_value(&space.criteria),
        "groups": groups,
        "attention": to_value(&space.attention),
        "ranking": {
            "order": ranked,
            "pinned": space.ranking.pinned,
            "visible_count": space.ranking.visible_count,
        },
        "cells": to_value(&space.cells),
        "snippets": space.snippets.values().map(to_value).collect::<Vec<_>>(),
        "deleted": to_value(&space.deleted),
    });
    sort_keys(doc)
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn export_json(space: &DecisionSpace, revision: u64) -> String {
    let mut out = serde_json::to_string_pretty(&export_json_value(space, revision)).expect("json");
    out.push('\n');
    out
}

fn cell_text(space: &DecisionSpace, option_id: &str, group_id: &str, sep: &str) -> String {
    space
        .cell(option_id, group_id)
        .map(|c| {
            c.snippet_ids
                .iter()
                .filter_map(|id| space.snippets.get(id))
                .map(|s| format!("[{}] {}", s.rating.initial(), s.text))
                .collect::<Vec<_>>()
                .join(sep)
        })
        .unwrap_or_default()
}

fn labels(space: &DecisionSpace) -> Vec<(String, String)> {
    space
        .ranked_groups()
        .into_iter()
        .filter_map(|gid| space.group(&gid).map(|g| (gid.clone(), g.label.clone())))
        .collect()
}

/// One row per option, one column per ranked group. Cells list the
/// snippets as `[rating initial] text`.
pub fn export_csv(space: &DecisionSpace) -> String {
    let columns = labels(space);
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["option".to_string()];
    header.extend(columns.iter().map(|(_, l)| l.clone()));
    writer.write_record(&header).expect("in-memory write");
    for option in &space.options {
        let mut row = vec![option.name.clone()];
        row.extend(columns.iter().map(|(gid, _)| cell_text(space, &option.id, gid, " | ")));
        writer.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("flush")).expect("utf-8 input")
}

fn md_escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('|', "\\|").replace('\n', " ")
}

pub fn export_markdown(space: &DecisionSpace, revision: u64) -> String {
    let columns = labels(space);
    let mut out = format!("# Decision table\n\nRevision {revision}\n\n");
    if space.options.is_empty() && columns.is_empty() {
        out.push_str("_No options or criteria yet._\n");
        return out;
    }
    out.push_str("| Option |");
    for (_, label) in &columns {
        out.push_str(&format!(" {} |", md_escape(label)));
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(columns.len()));
    out.push('\n');
    for option in &space.options {
        out.push_str(&format!("| {} |", md_escape(&option.name)));
        for (gid, _) in &columns {
            let cell = cell_text(space, &option.id, gid, "\n")
                .lines()
                .map(md_escape)
                .collect::<Vec<_>>()
                .join("<br>");
            out.push_str(&format!(" {cell} |"));
        }
        out.push('\n');
    }
    out
}
