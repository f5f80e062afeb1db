//! CSV output of aggregated results.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::experiment::ResultRow;

pub const HEADER: [&str; 10] = [
    "sweep_param",
    "sweep_value",
    "receiver",
    "cluster",
    "der",
    "ser",
    "f_mean",
    "m_mean",
    "trials",
    "seed",
];

/// Label of the cluster-average rows.
pub const MEAN_CLUSTER: &str = "mean";

/// Shortest of fixed or scientific notation carrying 10 significant digits,
/// with trailing zeros removed.
pub fn format_sig10(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.9e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..10).contains(&exp) {
        let decimals = (9 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn record(row: &ResultRow) -> [String; 10] {
    [
        row.sweep_param.clone(),
        format_sig10(row.sweep_value),
        row.receiver.clone(),
        row.cluster.map_or(MEAN_CLUSTER.to_string(), |c| c.to_string()),
        format_sig10(row.der),
        format_sig10(row.ser),
        format_sig10(row.f_mean),
        format_sig10(row.m_mean),
        row.trials.to_string(),
        row.seed.to_string(),
    ]
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Write(format!("CSV: {e}"));
    w.write_record(HEADER).map_err(io)?;
    for row in rows {
        w.write_record(record(row)).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Write(format!("CSV: {e}")))
}

pub fn csv_string(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(rows)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Parse(format!("CSV header: {e}")))?;
    if header.iter().ne(HEADER) {
        return Err(Error::Parse(format!("unexpected CSV header: {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse(format!("CSV line {line}: {e}")))?;
        if rec.len() != HEADER.len() {
            return Err(Error::Parse(format!("CSV line {line}: {} columns", rec.len())));
        }
        let float = |idx: usize| -> Result<f64> {
            let v = rec[idx]
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("CSV line {line}, {}: {e}", HEADER[idx])))?;
            if !v.is_finite() {
                return Err(Error::Parse(format!("CSV line {line}, {}: not finite", HEADER[idx])));
            }
            Ok(v)
        };
        let int = |idx: usize| -> Result<u64> {
            rec[idx]
                .parse::<u64>()
                .map_err(|e| Error::Parse(format!("CSV line {line}, {}: {e}", HEADER[idx])))
        };
        let cluster = match &rec[3] {
            MEAN_CLUSTER => None,
            c => Some(c.parse::<usize>().map_err(|e| Error::Parse(format!("CSV line {line}, cluster: {e}")))?),
        };
        rows.push(ResultRow {
            sweep_param: rec[0].to_string(),
            sweep_value: float(1)?,
            receiver: rec[2].to_string(),
            cluster,
            der: float(4)?,
            ser: float(5)?,
            f_mean: float(6)?,
            m_mean: float(7)?,
            trials: usize::try_from(int(8)?).map_err(|e| Error::Parse(e.to_string()))?,
            seed: int(9)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(v: f64, der: f64) -> ResultRow {
        ResultRow {
            sweep_param: "snr_db".into(),
            sweep_value: v,
            receiver: "jabfsp".into(),
            cluster: Some(2),
            der,
            ser: der * 2.0,
            f_mean: 0.25,
            m_mean: 1.0,
            trials: 500,
            seed: u64::MAX,
        }
    }

    #[test]
    fn formatting() {
        assert_eq!(format_sig10(0.0), "0");
        assert_eq!(format_sig10(2.0), "2");
        assert_eq!(format_sig10(-2.5), "-2.5");
        assert_eq!(format_sig10(1.0 / 3.0), "0.3333333333");
        assert_eq!(format_sig10(123456.789012345), "123456.789");
        assert_eq!(format_sig10(1.234e-7), "1.234e-7");
        assert_eq!(format_sig10(9.99999999999), "10");
        assert_eq!(format_sig10(6.02214076e23), "6.02214076e23");
    }

    proptest! {
        #[test]
        fn ten_significant_digits(x in -1e12f64..1e12) {
            let s = format_sig10(x);
            let back: f64 = s.parse().unwrap();
            prop_assert!((back - x).abs() <= 5e-10 * x.abs());
            let digits = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit())
                .collect::<String>();
            prop_assert!(digits.trim_start_matches('0').len() <= 10);
            prop_assert_eq!(format_sig10(back), s);
        }
    }

    #[test]
    fn empty_table_is_header_only() {
        assert_eq!(csv_string(&[]), format!("{}\n", HEADER.join(",")));
        assert!(parse_csv(&csv_string(&[])).unwrap().is_empty());
    }

    #[test]
    fn round_trip() {
        let mut rows = vec![row(-2.0, 0.0125), row(0.0, 1.0 / 3.0), row(4.0, 7.5e-9)];
        rows[1].cluster = None;
        let text = csv_string(&rows);
        for line in text.lines() {
            assert_eq!(line.split(',').count(), 10);
        }
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(csv_string(&parsed), text);
        assert_eq!(parsed[0], rows[0]);
        assert_eq!(parsed[2], rows[2]);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(parse_csv("a,b\n1,2\n").is_err());
        let good = csv_string(&[row(1.0, 0.5)]);
        assert!(parse_csv(&good.replace("jabfsp,2", "jabfsp,x")).is_err());
        assert!(parse_csv(&good.replace(",500,", ",-1,")).is_err());
        assert!(parse_csv(&format!("{good}1,2\n")).is_err());
    }

    #[test]
    fn write_failure_reports_path() {
        let err = emit_csv(&[], Path::new("/nonexistent-dir/out.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/out.csv"));
    }
}
