use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use eerk_core::catalog::MethodId;
use eerk_core::dissipation::{write_samples_csv, Variant, Verdict};

use crate::error::Result;
use crate::experiments::{Analysis, ConvergenceTable, EnergyRun, RateCurve};

/// File-name-safe form of a method spec, e.g. `eerk32_c2_3_4_c3_3_5`.
pub fn slug(m: MethodId) -> String {
    let mut s: String = m.to_string().chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    while s.contains("__") {
        s = s.replace("__", "_");
    }
    s.trim_matches('_').to_string()
}

fn num_tag(x: f64) -> String {
    format!("{x}").replace('.', "p").replace('-', "m")
}

fn create(dir: &Path, name: String) -> Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let f = File::create(&path)?;
    Ok((path, BufWriter::new(f)))
}

pub fn write_convergence_csv<W: Write>(mut w: W, table: &ConvergenceTable) -> Result<()> {
    writeln!(w, "tau,error,order")?;
    for r in &table.rows {
        match r.order {
            Some(o) => writeln!(w, "{:.16e},{:.16e},{o:.16e}", r.tau, r.error)?,
            None => writeln!(w, "{:.16e},{:.16e},", r.tau, r.error)?,
        }
    }
    Ok(())
}

pub fn write_energy_csv<W: Write>(mut w: W, run: &EnergyRun) -> Result<()> {
    writeln!(w, "t,E")?;
    for (t, e) in run.run.times().iter().zip(&run.run.energies) {
        writeln!(w, "{t:.16e},{e:.16e}")?;
    }
    Ok(())
}

pub fn write_state_csv<W: Write>(mut w: W, run: &EnergyRun) -> Result<()> {
    writeln!(w, "x,u")?;
    for (x, u) in run.nodes.iter().zip(&run.run.final_state) {
        writeln!(w, "{x:.16e},{u:.16e}")?;
    }
    Ok(())
}

pub fn write_margins_csv<W: Write>(mut w: W, run: &EnergyRun) -> Result<()> {
    let s = run.run.margins.first().map_or(0, Vec::len);
    write!(w, "step")?;
    for j in 1..=s {
        write!(w, ",margin_{j}")?;
    }
    writeln!(w)?;
    for (n, m) in run.run.margins.iter().enumerate() {
        write!(w, "{}", n + 1)?;
        for x in m {
            write!(w, ",{x:.16e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_rate_csv<W: Write>(mut w: W, curves: &[&RateCurve]) -> Result<()> {
    write!(w, "z")?;
    for c in curves {
        write!(w, ",{}", if c.variant == Variant::Implicit { "rate_implicit" } else { "rate" })?;
    }
    writeln!(w)?;
    if let Some(first) = curves.first() {
        for (i, z) in first.z.iter().enumerate() {
            write!(w, "{z:.16e}")?;
            for c in curves {
                write!(w, ",{:.16e}", c.rate[i])?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

pub fn write_classification_csv<W: Write>(mut w: W, analyses: &[Analysis]) -> Result<()> {
    writeln!(w, "method,verdict,witness_z,minor_index,minor_value")?;
    for a in analyses {
        let c = &a.classification;
        let verdict = match c.verdict {
            Verdict::PsdOnGrid => "psd_on_grid",
            Verdict::Npd => "npd",
        };
        match &c.witness {
            Some(wt) => writeln!(
                w,
                "\"{}\",{verdict},{:.16e},{},{:.16e}",
                a.method, wt.z, wt.minor_index, wt.minor_value
            )?,
            None => writeln!(w, "\"{}\",{verdict},,,", a.method)?,
        }
    }
    Ok(())
}

pub fn save_convergence(dir: &Path, tables: &[ConvergenceTable]) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for t in tables {
        let (p, mut w) = create(dir, format!("converge_{}.csv", slug(t.method)))?;
        write_convergence_csv(&mut w, t)?;
        w.flush()?;
        paths.push(p);
    }
    Ok(paths)
}

pub fn save_energy(dir: &Path, runs: &[EnergyRun]) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for r in runs {
        let tag = format!("{}_k{}_tau{}", slug(r.method), num_tag(r.kappa), num_tag(r.run.tau));
        let (p, mut w) = create(dir, format!("energy_{tag}.csv"))?;
        write_energy_csv(&mut w, r)?;
        w.flush()?;
        paths.push(p);
        let (p, mut w) = create(dir, format!("state_{tag}.csv"))?;
        write_state_csv(&mut w, r)?;
        w.flush()?;
        paths.push(p);
        if !r.run.margins.is_empty() {
            let (p, mut w) = create(dir, format!("margins_{tag}.csv"))?;
            write_margins_csv(&mut w, r)?;
            w.flush()?;
            paths.push(p);
        }
    }
    Ok(paths)
}

pub fn save_analysis(dir: &Path, analyses: &[Analysis]) -> Result<Vec<PathBuf>> {
    let (p, mut w) = create(dir, "classification.csv".into())?;
    write_classification_csv(&mut w, analyses)?;
    w.flush()?;
    let mut paths = vec![p];
    for a in analyses {
        let (p, mut w) = create(dir, format!("minors_{}.csv", slug(a.method)))?;
        write_samples_csv(&mut w, &a.samples)?;
        w.flush()?;
        paths.push(p);
    }
    Ok(paths)
}

pub fn save_rates(dir: &Path, curves: &[RateCurve]) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    let mut i = 0;
    while i < curves.len() {
        let m = curves[i].method;
        let group: Vec<&RateCurve> = curves[i..].iter().take_while(|c| c.method == m).collect();
        i += group.len();
        let (p, mut w) = create(dir, format!("rate_{}.csv", slug(m)))?;
        write_rate_csv(&mut w, &group)?;
        w.flush()?;
        paths.push(p);
    }
    Ok(paths)
}
