//! Numeric list parsing for sweep flags.
//!
//! Accepted forms, comma-separated: plain floats (`0.1`, `1e-10`), powers
//! (`2^-9`), and inclusive power ranges (`2^-5..2^-9`, expanding the
//! exponent one step at a time toward the right endpoint).

/// A single number: plain float or `base^exponent`.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    if let Some((base, exp)) = s.split_once('^') {
        let b: f64 = base
            .trim()
            .parse()
            .map_err(|_| format!("bad power base in `{s}`"))?;
        let e: i32 = exp
            .trim()
            .parse()
            .map_err(|_| format!("bad integer exponent in `{s}`"))?;
        Ok(b.powi(e))
    } else {
        s.parse().map_err(|_| format!("not a number: `{s}`"))
    }
}

fn split_power(s: &str) -> Result<(f64, i32), String> {
    let (base, exp) = s
        .split_once('^')
        .ok_or_else(|| format!("range endpoints use the base^exponent form, got `{s}`"))?;
    let b = base
        .trim()
        .parse()
        .map_err(|_| format!("bad power base in `{s}`"))?;
    let e = exp
        .trim()
        .parse()
        .map_err(|_| format!("bad integer exponent in `{s}`"))?;
    Ok((b, e))
}

/// A non-empty list of numbers.
pub fn parse_sweep(s: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in s.split(',') {
        let item = item.trim();
        if item.is_empty() {
            return Err(format!("empty entry in sweep list `{s}`"));
        }
        if let Some((lo, hi)) = item.split_once("..") {
            let (b1, e1) = split_power(lo)?;
            let (b2, e2) = split_power(hi)?;
            if b1 != b2 {
                return Err(format!("range `{item}` mixes bases {b1} and {b2}"));
            }
            let step: i32 = if e2 >= e1 { 1 } else { -1 };
            let mut e = e1;
            loop {
                out.push(b1.powi(e));
                if e == e2 {
                    break;
                }
                e += step;
            }
        } else {
            out.push(parse_number(item)?);
        }
    }
    if out.is_empty() {
        return Err("sweep list is empty".into());
    }
    Ok(out)
}

/// A non-empty list of positive integers (rejects fractional entries).
pub fn parse_usize_sweep(s: &str) -> Result<Vec<usize>, String> {
    parse_sweep(s)?
        .into_iter()
        .map(|v| {
            if v >= 1.0 && v <= 1e15 && (v - v.round()).abs() < 1e-9 * v.max(1.0) {
                Ok(v.round() as usize)
            } else {
                Err(format!("expected a positive integer, got {v}"))
            }
        })
        .collect()
}
