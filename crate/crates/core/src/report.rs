//! Print-ready usage report as a single self-contained HTML document.

use std::fmt::Write as _;

use crate::model::{PolicyFlag, UsageLogEntry, UsageSummary};
use crate::time::Timestamp;

pub const REPORT_CONTENT_TYPE: &str = "text/html; charset=utf-8";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub filename: String,
    pub content_type: &'static str,
    pub body: String,
}

const STYLE: &str = "
body { font-family: -apple-system, 'Segoe UI', Helvetica, Arial, sans-serif; margin: 2rem; color: #222; }
h1 { font-size: 1.5rem; margin-bottom: 0.25rem; }
h2 { font-size: 1.15rem; margin-top: 2rem; border-bottom: 1px solid #ccc; }
.meta { color: #555; margin: 0.1rem 0; }
.total { font-size: 2rem; font-weight: bold; }
table { border-collapse: collapse; width: 100%; margin-top: 0.5rem; font-size: 0.85rem; }
th, td { border: 1px solid #bbb; padding: 0.25rem 0.5rem; text-align: left; vertical-align: top; }
th { background: #eee; }
td.num { text-align: right; }
tr.violation td { background: #fdecea; }
.badge { color: #a00; font-weight: bold; }
.empty { color: #777; font-style: italic; }
.grid { display: flex; gap: 2rem; }
.grid > div { flex: 1; }
@media print { body { margin: 0.5cm; } tr { page-break-inside: avoid; } }
";

pub fn render(
    owner: &str,
    from: Timestamp,
    to: Timestamp,
    summary: &UsageSummary,
    entries: &[UsageLogEntry],
) -> Report {
    let mut html = String::with_capacity(4096 + entries.len() * 256);
    let title = format!("Data usage report for {}", escape(owner));
    let _ = write!(
        html,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n\
         <title>{title}</title>\n<style>{STYLE}</style>\n</head>\n<body>\n\
         <h1>{title}</h1>\n\
         <p class=\"meta\">Data owner: <strong>{}</strong></p>\n\
         <p class=\"meta\">Period: {from} (inclusive) to {to} (exclusive), UTC</p>\n",
        escape(owner)
    );

    let _ = write!(
        html,
        "<h2>Summary</h2>\n<p>Total usages: <span class=\"total\">{}</span></p>\n<div class=\"grid\">\n",
        summary.total
    );
    counts_table(
        &mut html,
        "By consumer",
        "Consumer",
        summary.by_consumer.iter(),
    );
    counts_table(&mut html, "By tool", "Tool", summary.by_tool.iter());
    counts_table(
        &mut html,
        "By day",
        "Day (UTC)",
        summary.by_day.iter().map(|d| (&d.day, &d.count)),
    );
    html.push_str("</div>\n");

    html.push_str("<h2>All usages</h2>\n");
    if entries.is_empty() {
        html.push_str("<p class=\"empty\">No data usages were logged in this period.</p>\n");
    } else {
        html.push_str(
            "<table>\n<thead><tr><th>#</th><th>Occurred (UTC)</th><th>Consumer</th><th>Tool</th>\
             <th>Category</th><th>Purpose</th><th>Access</th><th>Policy</th></tr></thead>\n<tbody>\n",
        );
        for e in entries {
            let (class, flag) = match e.policy_flag {
                PolicyFlag::Violation => (
                    " class=\"violation\"",
                    "<span class=\"badge\">violation</span>",
                ),
                PolicyFlag::None => ("", ""),
            };
            let _ = writeln!(
                html,
                "<tr{class}><td class=\"num\">{}</td><td>{}</td><td>{}</td><td>{}</td><td>{}</td>\
                 <td>{}</td><td>{}</td><td>{flag}</td></tr>",
                e.seq,
                e.occurred_at,
                escape(&e.consumer),
                escape(&e.tool),
                escape(&e.data_category),
                escape(&e.purpose),
                e.access_kind,
            );
        }
        html.push_str("</tbody>\n</table>\n");
    }
    html.push_str("</body>\n</html>\n");

    Report {
        filename: format!(
            "usage-report_{}_{}_{}.html",
            filename_safe(owner),
            filename_safe(&from.to_string()),
            filename_safe(&to.to_string())
        ),
        content_type: REPORT_CONTENT_TYPE,
        body: html,
    }
}

fn counts_table<'a>(
    html: &mut String,
    heading: &str,
    label: &str,
    rows: impl Iterator<Item = (&'a String, &'a u64)>,
) {
    let _ = write!(
        html,
        "<div><h3>{heading}</h3>\n<table>\n<thead><tr><th>{label}</th><th>Count</th></tr></thead>\n<tbody>\n"
    );
    let mut any = false;
    for (key, count) in rows {
        any = true;
        let _ = writeln!(
            html,
            "<tr><td>{}</td><td class=\"num\">{count}</td></tr>",
            escape(key)
        );
    }
    if !any {
        html.push_str("<tr><td colspan=\"2\" class=\"empty\">none</td></tr>\n");
    }
    html.push_str("</tbody>\n</table>\n</div>\n");
}

pub fn escape(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for c in raw.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

fn filename_safe(raw: &str) -> String {
    raw.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '@' | '-') {
                c
            } else {
                '-'
            }
        })
        .collect()
}
