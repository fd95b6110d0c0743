//! CSV export of recovered symbols.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::chain::ChainOutput;
use crate::error::Result;
use crate::keymap::symbol_bits;

/// Recovered symbols as CSV: index, I, Q, transmitted symbol, transmitted
/// bits and raw key bits (empty on a quadrant boundary).
pub fn write_symbols_csv(path: &Path, out: &ChainOutput) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "index,i,q,symbol,tx_b0,tx_b1,key_b0,key_b1")?;
    let r = &out.recovered;
    for (k, ((z, &s), key)) in r.z.iter().zip(&r.truth).zip(&out.raw_key).enumerate() {
        let [t0, t1] = symbol_bits(s);
        let (k0, k1) = match key {
            Some([a, b]) => (a.to_string(), b.to_string()),
            None => (String::new(), String::new()),
        };
        writeln!(f, "{k},{:.6e},{:.6e},{s},{t0},{t1},{k0},{k1}", z.re, z.im)?;
    }
    f.flush()?;
    Ok(())
}
