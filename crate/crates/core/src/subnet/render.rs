use super::{PlanRow, PlanTable};

pub const COLUMNS: [&str; 8] = [
    "Ref",
    "#Hosts",
    "NM",
    "#AA",
    "NAddr",
    "1st addr",
    "Last addr",
    "Bdcast",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RenderFormat {
    #[default]
    Pretty,
    Csv,
}

fn cells(r: &PlanRow) -> [String; 8] {
    [
        r.ref_name.clone(),
        r.required_hosts.to_string(),
        format!("/{}", r.prefix_len),
        r.awarded_hosts.to_string(),
        r.network_addr.to_string(),
        r.first_host.to_string(),
        r.last_host.to_string(),
        r.broadcast.to_string(),
    ]
}

pub fn render_plan(table: &PlanTable, format: RenderFormat) -> String {
    match format {
        RenderFormat::Csv => csv_text(table),
        RenderFormat::Pretty => pretty_text(table),
    }
}

fn csv_text(table: &PlanTable) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(COLUMNS).expect("write to Vec");
    for r in table.rows() {
        w.write_record(cells(r)).expect("write to Vec");
    }
    String::from_utf8(w.into_inner().expect("flush Vec")).expect("utf-8 input")
}

fn pretty_text(table: &PlanTable) -> String {
    let rows: Vec<[String; 8]> = table.rows().iter().map(cells).collect();
    let mut widths = COLUMNS.map(str::len);
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cols: &[String]| {
        let padded: Vec<String> = cols
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_owned()
    };
    let mut out = format!("Base network address: {}\n", table.base());
    out.push_str(&line(&COLUMNS.map(String::from)));
    out.push('\n');
    out.push_str(
        &widths
            .iter()
            .map(|&w| "-".repeat(w))
            .collect::<Vec<_>>()
            .join("  "),
    );
    out.push('\n');
    for r in &rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}
