//! Output artifacts: trace.csv (one row per recorded step), final_state.bin
//! (KVF1 binary snapshot), u_star.bin (conformal factor), summary.json
//! (outcome plus resolved configuration and convention-sheet hash).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::bundle::{BundleSpec, FieldState};
use crate::config::RunConfig;
use crate::conventions::{convention_hash, CONVENTIONS_VERSION};
use crate::flow::TraceRow;
use crate::lattice::LatticeGeometry;

pub const TRACE_HEADER: &str = "t,ymh,vortex_fn,sup_phi_sq,sup_ehat,sup_lambdaF,dbar_residual,f02_residual,moment_inf_norm,dt_used";

const MAGIC: &[u8; 4] = b"KVF1";

/// Writes the trace with the fixed column order; every value is printed
/// with 17 significant digits so round-tripping is exact.
pub fn write_trace(path: &Path, rows: &[TraceRow]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{TRACE_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.t,
            r.ymh,
            r.vortex_fn,
            r.sup_phi_sq,
            r.sup_ehat,
            r.sup_lambda_f,
            r.dbar_residual,
            r.f02_residual,
            r.moment_inf_norm,
            r.dt_used,
        )?;
    }
    w.flush()
}

/// KVF1 snapshot: magic, little-endian u32 {m, N, n, d}, f64 {L, tau,
/// t_final}, then the connection perturbation direction-major / site-major
/// with each fiber entry as interleaved re,im doubles, then φ site-major.
pub fn write_state(
    path: &Path,
    state: &FieldState,
    tau: f64,
    t_final: f64,
) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    let geom = state.geometry();
    let spec = state.spec();
    for v in [
        geom.complex_dim() as u32,
        geom.sites_per_axis() as u32,
        spec.rank() as u32,
        spec.degree() as u32,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in [geom.side(), tau, t_final] {
        w.write_all(&v.to_le_bytes())?;
    }
    let fiber_a = spec.rank() * spec.rank();
    for comp in 0..geom.axes() {
        for site in 0..geom.site_count() {
            for z in state.a().value(site, comp) {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
            debug_assert_eq!(state.a().value(site, comp).len(), fiber_a);
        }
    }
    for site in 0..geom.site_count() {
        for z in state.phi().value(site, 0) {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()
}

/// Reads a KVF1 snapshot back; returns the state with its (tau, t_final).
pub fn read_state(path: &Path) -> std::io::Result<(FieldState, f64, f64)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            "bad magic, expected KVF1",
        ));
    }
    let mut u32s = [0u32; 4];
    for v in u32s.iter_mut() {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        *v = u32::from_le_bytes(b);
    }
    let mut f64s = [0f64; 3];
    for v in f64s.iter_mut() {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        *v = f64::from_le_bytes(b);
    }
    let [m, n_sites, rank, degree] = u32s.map(|v| v as usize);
    let [side, tau, t_final] = f64s;
    let geom = LatticeGeometry::new(m, side, n_sites)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?;
    let spec = BundleSpec::new(rank, degree as i64, &geom)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?;
    let mut state = crate::bundle::background_state(spec, geom)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?;
    let read_f64 = |r: &mut BufReader<File>| -> std::io::Result<f64> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    };
    for comp in 0..geom.axes() {
        for site in 0..geom.site_count() {
            for z in state.a_mut().value_mut(site, comp) {
                z.re = read_f64(&mut r)?;
                z.im = read_f64(&mut r)?;
            }
        }
    }
    for site in 0..geom.site_count() {
        for z in state.phi_mut().value_mut(site, 0) {
            z.re = read_f64(&mut r)?;
            z.im = read_f64(&mut r)?;
        }
    }
    Ok((state, tau, t_final))
}

/// u_star.bin: magic, LE u32 {m, N}, f64 L, then u site-major as f64.
pub fn write_u(path: &Path, geom: &LatticeGeometry, u: &[f64]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(geom.complex_dim() as u32).to_le_bytes())?;
    w.write_all(&(geom.sites_per_axis() as u32).to_le_bytes())?;
    w.write_all(&geom.side().to_le_bytes())?;
    for v in u {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

/// summary.json: resolved config, convention sheet version and hash, plus
/// caller-supplied outcome fields.
pub fn write_summary(
    path: &Path,
    config: &RunConfig,
    outcome: serde_json::Value,
) -> std::io::Result<()> {
    let doc = serde_json::json!({
        "conventions": {
            "version": CONVENTIONS_VERSION,
            "hash": convention_hash(),
        },
        "config": config,
        "outcome": outcome,
    });
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &doc)?;
    writeln!(w)?;
    w.flush()
}
