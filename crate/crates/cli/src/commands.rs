//! Subcommand implementations. Each returns the JSON summary printed on
//! standard output.

use std::fs;
use std::path::Path;

use ecap_core::approx::{coefficient_ratios, inner_boundary, make_swiss_cheese, CenterSpec, CompactSetMask, ScanConfig};
use ecap_core::localization::{farfield_decay_check, AnnulusSpec, FarField};
use ecap_core::menger::{capacity_estimate, curvature_energy, DiscreteMeasure};
use ecap_core::oscillation::{l_oscillation, modulus_of_continuity, oscillation_via_psi, Disc};
use ecap_core::{build_partition, criterion_scan, localized_pieces, EllipticOperator, GridFunction, Result};
use serde_json::{json, Value};

use crate::args::{CheeseArgs, Command, LocalizeArgs, OpArgs, OscArgs, PhiArgs, ScanArgs};

fn operator(a: &OpArgs) -> Result<EllipticOperator> {
    EllipticOperator::new(a.op[0], a.op[1], a.op[2])
}

pub fn run(command: &Command) -> Result<Value> {
    match command {
        Command::Roots(a) => roots(a),
        Command::Phi(a) => phi(a),
        Command::Osc(a) => osc(a),
        Command::Curv(a) => {
            let mu = DiscreteMeasure::read_csv(&a.input)?;
            Ok(json!({ "n": mu.len(), "total_mass": mu.total(), "energy": curvature_energy(&mu) }))
        }
        Command::Cap(a) => {
            let mu = DiscreteMeasure::read_csv(&a.input)?;
            Ok(json!({ "n": mu.len(), "estimate": capacity_estimate(&mu)? }))
        }
        Command::Localize(a) => localize(a),
        Command::Scan(a) => scan(a),
        Command::Cheese(a) => cheese(a),
    }
}

fn roots(a: &OpArgs) -> Result<Value> {
    let op = operator(a)?;
    Ok(json!({
        "lambda1": op.lambda1,
        "lambda2": op.lambda2,
        "repeated": op.repeated,
        "nu": op.nu,
        "k1": op.k1,
        "root_residuals": op.root_residuals(),
    }))
}

fn phi(a: &PhiArgs) -> Result<Value> {
    let op = operator(&a.op)?;
    let (d1, d2) = op.grad_phi(a.z)?;
    let (k1, k2) = op.kernels(a.z)?;
    Ok(json!({ "phi": op.phi(a.z)?, "grad_phi": [d1, d2], "kernels": [k1, k2] }))
}

fn osc(a: &OscArgs) -> Result<Value> {
    let op = operator(&a.op)?;
    let f = GridFunction::read_json(&a.f)?;
    let disc = Disc::new(a.center, a.radius)?;
    let value = l_oscillation(&op, &f, &disc, a.n_boundary, a.n_radial)?;
    let via_psi = if a.psi { Some(oscillation_via_psi(&op, &f, &disc)?) } else { None };
    let omega = if f.has_gradients() {
        modulus_of_continuity(&f, a.radius)?
    } else {
        modulus_of_continuity(&f.clone().with_fd_gradients(), a.radius)?
    };
    Ok(json!({ "oscillation": value, "via_psi": via_psi, "omega": omega }))
}

fn localize(a: &LocalizeArgs) -> Result<Value> {
    let op = operator(&a.op)?;
    let f = GridFunction::read_json(&a.f)?;
    let g = f.grid;
    let partition = build_partition((g.origin, g.far_corner()), a.delta, &g)?;
    let pieces = localized_pieces(&op, &f, &partition)?;
    let diagnostic = match &a.mask {
        Some(path) => {
            let mask = CompactSetMask::read_pgm(path)?;
            let graded = if f.has_gradients() { f.clone() } else { f.clone().with_fd_gradients() };
            Some((mask, modulus_of_continuity(&graded, a.delta)?))
        }
        None => None,
    };
    let constants = json!({ "k4": a.k4, "m_max": a.m_max });
    fs::create_dir_all(&a.out)?;
    let mut csv = String::from("j1,j2,re_c0,im_c0,re_c11,im_c11,re_c12,im_c12\n");
    let mut written = 0;
    for k in pieces.nonzero() {
        let cell = &pieces.cells[k];
        let (j1, j2) = cell.index;
        let coeffs = pieces.laurent(&op, k, a.m_max);
        let sources = pieces.point_sources(k);
        let decay = if coeffs.support_radius > 0.0 {
            let spec = AnnulusSpec::with_k4(coeffs.support_radius, a.k4);
            farfield_decay_check(&op, FarField::Sources(&sources), &coeffs, &spec).ok()
        } else {
            None
        };
        let capacity = match &diagnostic {
            Some((mask, omega)) => Some(coefficient_ratios(&coeffs, *omega, a.delta, mask, a.k)?),
            None => None,
        };
        let record = json!({
            "index": [j1, j2],
            "center": cell.center,
            "source_l1": pieces.source_l1(k),
            "laurent": coeffs,
            "decay": decay,
            "capacity": capacity,
            "constants": constants,
        });
        fs::write(a.out.join(format!("cell_{j1}_{j2}.json")), serde_json::to_string_pretty(&record)?)?;
        if a.write_pieces {
            pieces.piece(k).write_json(&a.out.join(format!("piece_{j1}_{j2}.json")))?;
        }
        let (c0, (c11, c12)) = (coeffs.c0, coeffs.c1s);
        csv.push_str(&format!("{j1},{j2},{},{},{},{},{},{}\n", c0.re, c0.im, c11.re, c11.im, c12.re, c12.im));
        written += 1;
    }
    fs::write(a.out.join("coefficients.csv"), csv)?;
    let reconstruction = if a.check {
        let sum = pieces.reconstruct();
        let err = sum.values.iter().zip(&f.values).map(|(s, v)| (s - v).norm()).fold(0.0, f64::max);
        Some(err / f.sup_norm().max(f64::MIN_POSITIVE))
    } else {
        None
    };
    Ok(json!({
        "cells": pieces.len(),
        "nonzero": written,
        "partition": partition.stats(),
        "reconstruction_rel_error": reconstruction,
        "omega": diagnostic.as_ref().map(|d| d.1),
        "constants": constants,
        "out": a.out,
    }))
}

fn scan(a: &ScanArgs) -> Result<Value> {
    let op = operator(&a.op)?;
    let f = GridFunction::read_json(&a.f)?;
    let mask = CompactSetMask::read_pgm(&a.mask)?;
    let centers = match a.center_step {
        Some(step) if a.deep => CenterSpec::Deep { step },
        Some(step) => CenterSpec::InSet { step },
        None => CenterSpec::Points { points: a.centers.clone() },
    };
    let mut cfg = ScanConfig::new(a.radii.clone(), centers);
    cfg.k = a.k;
    cfg.zero_tol = a.zero_tol;
    cfg.omega_scale = a.omega_scale;
    cfg.function_id = a.function_id.clone().unwrap_or_else(|| stem(&a.f));
    let report = criterion_scan(&op, &f, &mask, &cfg)?;
    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join("report.json"), report.to_json_string()?)?;
    fs::write(a.out.join("heatmap.svg"), report.to_svg())?;
    Ok(json!({
        "schema": report.schema,
        "discs": report.records.len(),
        "per_radius": report.per_radius,
        "out": a.out,
    }))
}

fn cheese(a: &CheeseArgs) -> Result<Value> {
    let outer = Disc::new(a.center, a.radius)?;
    let mask = make_swiss_cheese(a.seed, &outer, a.holes, a.hole_scale, a.spacing)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    mask.write_pgm(&a.out)?;
    Ok(json!({
        "nx": mask.grid.nx,
        "ny": mask.grid.ny,
        "cells": mask.count(),
        "area": mask.area(),
        "holes": mask.construction().map_or(0, |c| c.holes.len()),
        "inner_boundary_cells": inner_boundary(&mask).count(),
        "out": a.out,
    }))
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or_else(|| "f".into(), |s| s.to_string_lossy().into_owned())
}

