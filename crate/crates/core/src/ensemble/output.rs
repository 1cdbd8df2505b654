use std::io::{self, Write};

use super::RateTable;

pub const RATE_CSV_HEADER: &str =
    "resolution,u_l2,u_l2_order,u_h1,u_h1_order,v_l2,v_l2_order,u_l2_stderr,u_h1_stderr,v_l2_stderr";

/// Errors and orders interleaved per column, then the standard errors; the
/// first row has empty orders.
pub fn write_rate_csv(table: &RateTable, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "{RATE_CSV_HEADER}")?;
    for r in &table.rows {
        let mut line = r.label.clone();
        for k in 0..3 {
            line.push_str(&format!(",{:.6e},", r.errors[k]));
            if let Some(o) = r.orders[k] {
                line.push_str(&format!("{o:.4}"));
            }
        }
        for k in 0..3 {
            line.push_str(&format!(",{:.3e}", r.stderr[k]));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Whitespace-separated `resolution u_l2 u_h1 v_l2` for log-log plots.
pub fn write_gnuplot(table: &RateTable, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "# resolution u_l2 u_h1 v_l2")?;
    for r in &table.rows {
        writeln!(w, "{:.10e} {:.6e} {:.6e} {:.6e}", r.resolution, r.errors[0], r.errors[1], r.errors[2])?;
    }
    Ok(())
}
