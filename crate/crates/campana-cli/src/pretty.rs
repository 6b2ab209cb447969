//! Human-readable one-line rendering of small series.

use campana::gring::MotClass;
use campana::mvseries::MultiSeries;

pub fn render(series: &MultiSeries<MotClass>) -> String {
    if series.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (e, c) in series.terms() {
        let vars: Vec<String> = e
            .0
            .iter()
            .enumerate()
            .filter(|(_, &x)| x > 0)
            .map(|(i, &x)| {
                if x == 1 {
                    format!("T{}", i)
                } else {
                    format!("T{}^{}", i, x)
                }
            })
            .collect();
        let minus_one = MotClass::from_int(-1);
        let (sign, body) = if *c == MotClass::one() {
            ('+', None)
        } else if *c == minus_one {
            ('-', None)
        } else {
            let text = c.to_string();
            if let Some(rest) = text.strip_prefix('-') {
                ('-', Some(rest.to_string()))
            } else {
                ('+', Some(text))
            }
        };
        let coeff_part = match body {
            None => {
                if vars.is_empty() {
                    "1".to_string()
                } else {
                    String::new()
                }
            }
            Some(b) => {
                if b.contains(' ') {
                    format!("({})", b)
                } else {
                    b
                }
            }
        };
        let term = match (coeff_part.is_empty(), vars.is_empty()) {
            (true, true) => "1".to_string(),
            (true, false) => vars.join("·"),
            (false, true) => coeff_part,
            (false, false) => format!("{}·{}", coeff_part, vars.join("·")),
        };
        if out.is_empty() {
            if sign == '-' {
                out.push('-');
            }
            out.push_str(&term);
        } else {
            out.push_str(if sign == '-' { " - " } else { " + " });
            out.push_str(&term);
        }
    }
    out
}
