//! CSV rendering of loss sweeps. Reals use Rust's shortest round-trip
//! exponent form, so output is locale-independent and byte-stable.

use std::fmt::Write as _;

use crate::optimizer::SweepPoint;

pub const CSV_HEADER: &str =
    "loss_db,mu_opt,family,rate_passive,rate_bbm92,epsilon,h_min_w,seed_demand,seed_supply,e_b_tilde,e_p_tilde";

pub fn csv_row(p: &SweepPoint) -> String {
    let b = &p.breakdown;
    format!(
        "{:e},{:e},{},{:e},{:e},{},{:e},{:e},{:e},{:e},{:e}",
        p.loss_db,
        p.mu_opt,
        b.family,
        b.rate_per_pulse_passive,
        b.rate_per_pulse_bbm92,
        b.epsilon,
        b.h_min_w,
        b.seed_demand,
        b.seed_supply,
        b.e_b_tilde,
        b.e_p_tilde
    )
}

pub fn sweep_to_csv(points: &[SweepPoint]) -> String {
    let mut out = String::with_capacity(64 * (points.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(out, "{}", csv_row(p));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::sweep_loss;
    use crate::ProtocolParams;

    #[test]
    fn rows_match_header_and_parse_back() {
        let pts = sweep_loss(&ProtocolParams::default(), &[0.0, 10.0]).unwrap();
        let csv = sweep_to_csv(&pts);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        let ncols = CSV_HEADER.split(',').count();
        for (line, p) in lines[1..].iter().zip(&pts) {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols.len(), ncols);
            assert_eq!(cols[0].parse::<f64>().unwrap(), p.loss_db);
            assert_eq!(cols[1].parse::<f64>().unwrap(), p.mu_opt);
            assert_eq!(cols[3].parse::<f64>().unwrap(), p.breakdown.rate_per_pulse_passive);
        }
    }
}
