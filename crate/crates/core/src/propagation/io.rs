use super::OverlapSeries;

/// CSV `t,|<Psi_i|Phi_0>|^2,...` with t in ns.
pub fn overlaps_csv(series: &OverlapSeries) -> String {
    let cols = series.rows.first().map_or(0, Vec::len);
    let mut out = String::from("t");
    for k in 0..cols {
        out.push_str(&format!(",|<Psi_i|Phi_{k}>|^2"));
    }
    out.push('\n');
    for (t, row) in series.times.iter().zip(&series.rows) {
        out.push_str(&format!("{t:?}"));
        for v in row {
            out.push_str(&format!(",{v:?}"));
        }
        out.push('\n');
    }
    out
}

pub fn parse_overlaps_csv(text: &str) -> std::result::Result<OverlapSeries, String> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or("empty overlap file")?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"t") || cols.len() < 2 {
        return Err("line 1: header must start with `t` and list at least one overlap column".into());
    }
    for (k, c) in cols[1..].iter().enumerate() {
        if *c != format!("|<Psi_i|Phi_{k}>|^2") {
            return Err(format!("line 1, column {}: unexpected header `{c}`", k + 2));
        }
    }
    let mut s = OverlapSeries::default();
    for (i, line) in lines {
        let vals = line
            .split(',')
            .enumerate()
            .map(|(j, v)| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| format!("line {}, column {}: {e}", i + 1, j + 1))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if vals.len() != cols.len() {
            return Err(format!("line {}: expected {} fields, found {}", i + 1, cols.len(), vals.len()));
        }
        s.times.push(vals[0]);
        s.rows.push(vals[1..].to_vec());
    }
    Ok(s)
}
