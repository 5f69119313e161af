//! CSV, markdown and SVG writers. All numbers go through [`fmt_num`] so the
//! outputs are locale-free and byte-stable.

use std::fmt::Write as _;
use std::io::Write;

use beliefcal::metrics::RowOutcome;
use beliefcal::{
    Belief, CalibrationRun, ContextKind, Decision, Filters, GridCellMetrics, Objective,
};

/// Shortest decimal that round-trips the value rounded to 12 significant
/// digits. Plain notation in [1e-5, 1e15), exponent notation outside.
pub fn fmt_num(v: f64) -> String {
    fmt_sig(v, 12)
}

fn fmt_sig(v: f64, digits: usize) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{:.*e}", digits - 1, v)
        .parse()
        .expect("formatted float parses");
    if rounded == 0.0 {
        return "0".into();
    }
    if (1e-5..1e15).contains(&rounded.abs()) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

pub const CELL_HEADER: [&str; 8] = [
    "sigma",
    "lambda",
    "beta",
    "neg_log_prob",
    "avg_cost",
    "fn_cost",
    "tn_cost",
    "denial_count",
];

fn cell_record(m: &GridCellMetrics) -> Vec<String> {
    vec![
        fmt_num(m.belief.sigma),
        fmt_num(m.belief.lambda),
        fmt_num(m.belief.beta),
        fmt_num(m.neg_log_prob),
        fmt_num(m.avg_cost),
        fmt_num(m.fn_cost),
        fmt_num(m.tn_cost),
        m.denial_count.to_string(),
    ]
}

/// One row per cell, in grid order.
pub fn write_cells<W: Write>(out: W, cells: &[GridCellMetrics]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CELL_HEADER)?;
    for m in cells {
        w.write_record(cell_record(m))?;
    }
    w.flush()?;
    Ok(())
}

fn same_belief(a: &Belief, b: &Belief) -> bool {
    a.sigma == b.sigma && a.lambda == b.lambda && a.beta == b.beta
}

/// Frontier cells with every metric, in frontier order; each record also
/// appears verbatim in the cell table.
pub fn write_pareto<W: Write>(out: W, run: &CalibrationRun) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CELL_HEADER)?;
    for (belief, _) in &run.frontier.entries {
        let m = run
            .cells
            .iter()
            .find(|m| same_belief(&m.belief, belief))
            .expect("frontier beliefs come from the cell table");
        w.write_record(cell_record(m))?;
    }
    w.flush()?;
    Ok(())
}

fn objective_label(o: Objective, kind: ContextKind) -> &'static str {
    match (o, kind) {
        (Objective::NegLogProb, _) => "Log-Prob",
        (Objective::FnCost, _) => "FN Cost",
        (Objective::TnCost, _) => "TN Cost",
        (Objective::AvgCost, ContextKind::Actionable) => "Actionable Cost",
        (Objective::AvgCost, ContextKind::Policy) => "Policy Cost",
        (Objective::AvgCost, _) => "Recourse Cost",
    }
}

/// Frontier table: σ, λ, β when the grid varies it, then one column per
/// objective, four significant digits.
pub fn pareto_markdown(run: &CalibrationRun, kind: ContextKind, show_beta: bool) -> String {
    let mut head = vec!["σ", "λ"];
    if show_beta {
        head.push("β");
    }
    head.extend(run.objectives.iter().map(|&o| objective_label(o, kind)));
    let mut s = String::new();
    let _ = writeln!(s, "| {} |", head.join(" | "));
    let _ = writeln!(s, "|{}", "---|".repeat(head.len()));
    for (b, v) in &run.frontier.entries {
        let mut row = vec![fmt_num(b.sigma), fmt_num(b.lambda)];
        if show_beta {
            row.push(fmt_num(b.beta));
        }
        row.extend(v.values.iter().map(|&x| fmt_sig(x, 4)));
        let _ = writeln!(s, "| {} |", row.join(" | "));
    }
    let _ = writeln!(
        s,
        "\n{} of {} cells on the frontier ({} retained after filters).",
        run.frontier.len(),
        run.cells.len(),
        run.retained
    );
    if run.empty_after_filter {
        let _ = writeln!(s, "\nNo cell passed the filters.");
    }
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Axis {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64> + Clone, from: f64, to: f64) -> Self {
        let lo = values.clone().fold(f64::INFINITY, f64::min);
        let hi = values.fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
            (lo - 0.5, hi + 0.5)
        } else {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        };
        Axis { lo, hi, from, to }
    }

    fn map(&self, v: f64) -> f64 {
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }
}

/// Cost against negative log-probability for every cell; frontier cells in
/// red joined by a polyline, cells removed by the filters in light grey.
pub fn scatter_svg(run: &CalibrationRun, filters: &Filters, kind: ContextKind) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const M: f64 = 60.0;
    let cost = run
        .objectives
        .iter()
        .copied()
        .find(|&o| o != Objective::NegLogProb)
        .unwrap_or(Objective::AvgCost);
    let xs = run.cells.iter().map(|m| cost.value(m));
    let ys = run.cells.iter().map(|m| m.neg_log_prob);
    let ax = Axis::new(xs, M, W - M / 2.0);
    let ay = Axis::new(ys, H - M, M / 2.0);
    let on_front = |m: &GridCellMetrics| {
        run.frontier
            .entries
            .iter()
            .any(|(b, _)| same_belief(b, &m.belief))
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#
    );
    let (x0, x1, y0, y1) = (M, W - M / 2.0, H - M, M / 2.0);
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#
    );
    for (v, anchor, px) in [(ax.lo, "start", x0), (ax.hi, "end", x1)] {
        let _ = writeln!(
            s,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="{anchor}">{}</text>"#,
            y0 + 16.0,
            fmt_sig(v, 3)
        );
    }
    for (v, py) in [(ay.lo, y0), (ay.hi, y1 + 10.0)] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{py:.2}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            fmt_sig(v, 3)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 16.0,
        escape(objective_label(cost, kind))
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">negative mean log-probability</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );

    let mut front: Vec<(f64, f64)> = Vec::new();
    for m in &run.cells {
        let (px, py) = (ax.map(cost.value(m)), ay.map(m.neg_log_prob));
        let kept = filters.tn_floor.is_none_or(|f| m.tn_cost >= f);
        let fill = if on_front(m) {
            front.push((px, py));
            "#d62728"
        } else if kept {
            "#555555"
        } else {
            "#cccccc"
        };
        let _ = writeln!(
            s,
            r#"<circle cx="{px:.2}" cy="{py:.2}" r="4" fill="{fill}"><title>sigma={} lambda={} beta={}</title></circle>"#,
            fmt_num(m.belief.sigma),
            fmt_num(m.belief.lambda),
            fmt_num(m.belief.beta)
        );
    }
    if front.len() > 1 {
        front.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
        let pts: Vec<String> = front
            .iter()
            .map(|(x, y)| format!("{x:.2},{y:.2}"))
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#d62728" stroke-width="1.5"/>"##,
            pts.join(" ")
        );
    }
    let _ = writeln!(s, "</svg>");
    s
}

pub const FLIPSET_HEADER: [&str; 7] = [
    "row",
    "label",
    "decision",
    "probability",
    "cost",
    "n_changes",
    "actions",
];

/// `name=value` pairs joined by `;`, largest magnitude first; zero entries
/// are omitted.
pub fn format_actions(names: &[String], action: &[f64]) -> (usize, String) {
    let mut idx: Vec<usize> = (0..action.len()).filter(|&j| action[j] != 0.0).collect();
    idx.sort_by(|&a, &b| action[b].abs().total_cmp(&action[a].abs()).then(a.cmp(&b)));
    let parts: Vec<String> = idx
        .iter()
        .map(|&j| format!("{}={}", names[j], fmt_num(action[j])))
        .collect();
    (idx.len(), parts.join(";"))
}

pub fn write_flipset<W: Write>(
    out: W,
    names: &[String],
    rows: &[(usize, RowOutcome)],
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FLIPSET_HEADER)?;
    for (id, r) in rows {
        let (n_changes, actions) = match &r.recourse {
            Some(res) => format_actions(names, res.action.as_slice()),
            None => (0, String::new()),
        };
        w.write_record([
            id.to_string(),
            fmt_num(r.label),
            match r.decision {
                Decision::Approve => "approve".to_string(),
                Decision::Deny => "deny".to_string(),
            },
            fmt_num(r.probability),
            fmt_num(r.cost),
            n_changes.to_string(),
            actions,
        ])?;
    }
    w.flush()?;
    Ok(())
}
