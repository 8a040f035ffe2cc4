//! Physical quantities on the command line: `94.8ms`, `64MHz`, `136.25mV`, `33`.

/// Parse a number with an optional SI prefix and unit. `unit` is matched
/// case-insensitively and may be omitted by the user.
pub fn parse_quantity(s: &str, unit: &str) -> Result<f64, String> {
    let s = s.trim();
    let split = (1..=s.len())
        .rev()
        .filter(|&i| s.is_char_boundary(i))
        .find(|&i| s[..i].parse::<f64>().is_ok())
        .ok_or_else(|| format!("'{s}' does not start with a number"))?;
    let value: f64 = s[..split].parse().expect("checked above");
    let mut rest = s[split..].trim();
    if rest.len() >= unit.len() && rest[rest.len() - unit.len()..].eq_ignore_ascii_case(unit) {
        rest = &rest[..rest.len() - unit.len()];
    } else if unit == "ohm" && rest.ends_with('Ω') {
        rest = rest.trim_end_matches('Ω');
    }
    let scale = match rest {
        "" => 1.0,
        "G" => 1e9,
        "M" => 1e6,
        "k" => 1e3,
        "m" => 1e-3,
        "u" | "µ" => 1e-6,
        "n" => 1e-9,
        other => return Err(format!("unknown prefix or unit '{other}' in '{s}' (expected {unit})")),
    };
    let v = value * scale;
    if !v.is_finite() {
        return Err(format!("'{s}' is not finite"));
    }
    Ok(v)
}

pub fn seconds(s: &str) -> Result<f64, String> {
    parse_quantity(s, "s")
}

pub fn hertz(s: &str) -> Result<f64, String> {
    parse_quantity(s, "Hz")
}

pub fn volts(s: &str) -> Result<f64, String> {
    parse_quantity(s, "V")
}

pub fn ohms(s: &str) -> Result<f64, String> {
    parse_quantity(s, "ohm")
}
