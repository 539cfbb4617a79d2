//! Acceptance suite A1–A9. Set RESALG_PROFILE=full for the extended sweeps.

use std::process::ExitCode;

use resonance_core::acceptance::{run_acceptance, AcceptanceOptions, Profile};

fn main() -> ExitCode {
    let profile = match std::env::var("RESALG_PROFILE").as_deref() {
        Ok("full") => Profile::Full,
        _ => Profile::Fast,
    };
    let report = run_acceptance(&AcceptanceOptions { profile, ..Default::default() }).expect("criteria list is fixed");
    print!("{}", report.table());

    // a shifted ν table must be caught
    let tampered = run_acceptance(&AcceptanceOptions { tamper_nu: 1e-6, only: vec!["A2".into()], ..Default::default() })
        .expect("A2 exists");
    let caught = !tampered.all_passed();
    println!("{} negative control: tampered nu table rejected by A2", if caught { "PASS" } else { "FAIL" });

    if report.all_passed() && caught {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
