use std::fmt::Write as _;

use super::{f, Header};
use crate::micro::StudyReport;

/// Study CSV: one row per swept parameter (named by the report label) and a
/// closing verdict line.
pub fn write_study_csv(r: &StudyReport, header: &Header) -> String {
    let mut s = String::new();
    for (k, v) in header {
        let _ = writeln!(s, "# {k} {v}");
    }
    let _ = writeln!(s, "{},error_L2,energy_bulk,energy_surface,runtime_s", r.label);
    for row in &r.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.3}",
            f(row.param),
            f(row.error_l2),
            f(row.energy_bulk),
            f(row.energy_surface),
            row.runtime_s
        );
    }
    let _ = writeln!(s, "monotone_decrease: {}", r.monotone_decrease());
    s
}
