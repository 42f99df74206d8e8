//! On-disk ground-state cache: a `key=value` header followed by
//! comma-separated rows `r,U,V,U',V'` printed with 17 significant digits, so
//! a reloaded profile is bit-identical to the solved one.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::format::machine;
use crate::ground_state::{
    solve_at, validate_decay, GroundState, Normalization, SolverOptions, TailModel,
};
use crate::hyperbola::{Exponent, HyperbolaPoint};

pub const FORMAT_VERSION: u32 = 1;

/// Environment variable overriding the cache directory.
pub const CACHE_ENV: &str = "LELAB_CACHE_DIR";

const MAGIC: &str = "# lelab ground-state cache";
const COLUMNS: &str = "r,U,V,dU,dV";

/// Cache directory: `$LELAB_CACHE_DIR` when set, else `fallback`.
pub fn cache_dir(fallback: &Path) -> PathBuf {
    match std::env::var_os(CACHE_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => fallback.to_path_buf(),
    }
}

fn options_digest(opts: &SolverOptions) -> String {
    let json = serde_json::to_string(opts).expect("options serialize");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().take(6).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// File name for one (p, N, tolerance) triple; the options digest keeps
/// runs with different grids apart.
pub fn cache_file_name(point: &HyperbolaPoint, opts: &SolverOptions) -> String {
    let p = point.p_exponent().to_string().replace('/', "over").replace('.', "p");
    format!(
        "ground_state_p{p}_N{}_rtol{:e}_{}.csv",
        point.n(),
        opts.rtol,
        options_digest(opts)
    )
}

pub fn write_ground_state(gs: &GroundState, path: &Path) -> Result<()> {
    let mut out = String::new();
    let pt = gs.point();
    let nm = gs.normalization();
    let t = gs.tail();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "format_version={FORMAT_VERSION}");
    let _ = writeln!(out, "p={}", pt.p_exponent());
    let _ = writeln!(out, "q={}", pt.q_exponent());
    let _ = writeln!(out, "N={}", pt.n());
    let _ = writeln!(out, "v_at_zero={}", machine(nm.v_at_zero));
    let _ = writeln!(out, "u_at_zero={}", machine(nm.u_at_zero));
    let _ = writeln!(out, "scale={}", machine(nm.scale));
    let _ = writeln!(out, "r_max={}", machine(gs.r_max()));
    let _ = writeln!(out, "u0_error={}", machine(gs.u0_error()));
    let _ = writeln!(
        out,
        "tail={},{},{},{},{},{},{}",
        machine(t.n),
        machine(t.a_coef),
        machine(t.b_coef),
        machine(t.c_coef),
        machine(t.d_coef),
        machine(t.mu),
        machine(t.mv)
    );
    let _ = writeln!(
        out,
        "solver={}",
        serde_json::to_string(gs.options()).map_err(|e| Error::CacheFormat(e.to_string()))?
    );
    let _ = writeln!(out, "{COLUMNS}");
    for i in 0..gs.grid().len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            machine(gs.grid()[i]),
            machine(gs.u()[i]),
            machine(gs.v()[i]),
            machine(gs.du()[i]),
            machine(gs.dv()[i])
        );
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, out)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn parse_f64(key: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::CacheFormat(format!("{key}: bad number `{s}`")))
}

pub fn read_ground_state(path: &Path) -> Result<GroundState> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::CacheFormat("missing header line".into()));
    }
    let mut header = std::collections::BTreeMap::new();
    for line in lines.by_ref() {
        if line == COLUMNS {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::CacheFormat(format!("bad header line `{line}`")))?;
        header.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| {
        header
            .get(k)
            .map(String::as_str)
            .ok_or_else(|| Error::CacheFormat(format!("missing header key `{k}`")))
    };
    let version: u32 = get("format_version")?
        .parse()
        .map_err(|_| Error::CacheFormat("bad format_version".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::CacheFormat(format!(
            "format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let p: Exponent = get("p")?.parse()?;
    let q: Exponent = get("q")?.parse()?;
    let n: u32 = get("N")?
        .parse()
        .map_err(|_| Error::CacheFormat("bad N".into()))?;
    let point = HyperbolaPoint::new(p, q, n)?;
    let normalization = Normalization {
        v_at_zero: parse_f64("v_at_zero", get("v_at_zero")?)?,
        u_at_zero: parse_f64("u_at_zero", get("u_at_zero")?)?,
        scale: parse_f64("scale", get("scale")?)?,
    };
    let tail_vals = get("tail")?
        .split(',')
        .map(|s| parse_f64("tail", s))
        .collect::<Result<Vec<_>>>()?;
    if tail_vals.len() != 7 {
        return Err(Error::CacheFormat("tail needs 7 values".into()));
    }
    let tail = TailModel {
        n: tail_vals[0],
        a_coef: tail_vals[1],
        b_coef: tail_vals[2],
        c_coef: tail_vals[3],
        d_coef: tail_vals[4],
        mu: tail_vals[5],
        mv: tail_vals[6],
    };
    let options: SolverOptions =
        serde_json::from_str(get("solver")?).map_err(|e| Error::CacheFormat(e.to_string()))?;
    let u0_error = parse_f64("u0_error", get("u0_error")?)?;

    let mut cols: [Vec<f64>; 5] = Default::default();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let vals: Vec<&str> = line.split(',').collect();
        if vals.len() != 5 {
            return Err(Error::CacheFormat(format!("bad row `{line}`")));
        }
        for (c, v) in cols.iter_mut().zip(vals) {
            c.push(parse_f64("row", v)?);
        }
    }
    let [grid, u, v, du, dv] = cols;
    if grid.len() < 2 || !grid.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::CacheFormat("grid is not strictly increasing".into()));
    }
    let r_max = parse_f64("r_max", get("r_max")?)?;
    if grid.last() != Some(&r_max) {
        return Err(Error::CacheFormat("r_max does not match the last row".into()));
    }
    let mut gs = GroundState {
        point,
        grid,
        u,
        v,
        du,
        dv,
        normalization,
        tail,
        tail_fit: crate::ground_state::placeholder_report(),
        u0_error,
        residual: f64::NAN,
        options,
    };
    gs.residual = gs.max_residual();
    gs.tail_fit = validate_decay(&gs, [0.5 * r_max, r_max])?;
    Ok(gs)
}

/// Loads the cached ground state for (point, opts) from `dir`, solving and
/// writing it on a miss. Returns the state and whether it came from cache.
pub fn load_or_solve(
    dir: &Path,
    point: &HyperbolaPoint,
    opts: &SolverOptions,
) -> Result<(GroundState, bool)> {
    let path = dir.join(cache_file_name(point, opts));
    if path.exists() {
        let gs = read_ground_state(&path)?;
        if gs.point() == point && gs.options() == opts {
            return Ok((gs, true));
        }
    }
    let gs = solve_at(point, opts)?;
    write_ground_state(&gs, &path)?;
    Ok((gs, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::solve_ground_state;

    #[test]
    fn round_trip_is_bit_exact() {
        let opts = SolverOptions {
            r_max: 200.0,
            estimate_error: false,
            ..SolverOptions::default()
        };
        let gs = solve_ground_state(Exponent::rational(5, 3).unwrap(), 8, &opts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gs.csv");
        write_ground_state(&gs, &path).unwrap();
        let back = read_ground_state(&path).unwrap();
        assert_eq!(back.grid(), gs.grid());
        assert_eq!(back.u(), gs.u());
        assert_eq!(back.dv(), gs.dv());
        assert_eq!(back.tail(), gs.tail());
        assert_eq!(back.normalization(), gs.normalization());
        assert_eq!(back.options(), gs.options());
        assert_eq!(back.residual(), gs.residual());
        assert_eq!(back.tail_fit(), gs.tail_fit());
        assert!(back.u0_error().is_nan());

        let (cached, hit) = load_or_solve(dir.path(), gs.point(), &opts).unwrap();
        assert!(!hit);
        let (again, hit) = load_or_solve(dir.path(), gs.point(), &opts).unwrap();
        assert!(hit);
        assert_eq!(again.u(), cached.u());
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        fs::write(&path, "hello\n").unwrap();
        assert!(matches!(read_ground_state(&path), Err(Error::CacheFormat(_))));
    }

    #[test]
    fn file_name_is_filesystem_safe() {
        let pt = HyperbolaPoint::from_p(Exponent::rational(5, 3).unwrap(), 8).unwrap();
        let name = cache_file_name(&pt, &SolverOptions::default());
        assert!(name.starts_with("ground_state_p5over3_N8_rtol1e-13_"));
        assert!(!name.contains('/'));
    }
}
