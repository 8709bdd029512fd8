//! Number formatting and file output.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// Shortest of fixed or scientific notation carrying 12 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        let s = format!("{x:.11e}");
        let (mantissa, e) = s
            .split_once('e')
            .expect("scientific format has an exponent");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".config.json");
    PathBuf::from(name)
}

/// Write `body` to `out`, or to stdout when no path is given.
pub fn emit(out: Option<&Path>, body: &str) -> io::Result<()> {
    match out {
        Some(path) => fs::write(path, body),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
            stdout.flush()
        }
    }
}

pub fn write_sidecar(out: Option<&Path>, config: &serde_json::Value) -> io::Result<()> {
    if let Some(path) = out {
        let mut text = serde_json::to_string_pretty(config).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(sidecar_path(path), text)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(0.25), "0.25");
        assert_eq!(fmt_num(-std::f64::consts::FRAC_1_PI), "-0.318309886184");
        assert_eq!(fmt_num(123456.789), "123456.789");
        assert_eq!(fmt_num(1.0 / 3.0 * 1e-9), "3.33333333333e-10");
        assert_eq!(fmt_num(2e15), "2e15");
        assert_eq!(fmt_num(0.42612263885053), "0.426122638851");
    }

    #[test]
    fn round_trip_precision() {
        for x in [
            std::f64::consts::PI,
            -1.0e-7 / 7.0,
            6.02214076e23,
            0.1 + 0.2,
        ] {
            let back: f64 = fmt_num(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 1e-11, "{x} -> {back}");
        }
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(
            sidecar_path(Path::new("out/run.csv")),
            PathBuf::from("out/run.csv.config.json")
        );
    }
}
