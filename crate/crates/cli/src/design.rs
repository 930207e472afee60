//! `eprsim design`: beam geometry and walk-off arithmetic.

use clap::{Args, Subcommand, ValueEnum};
use eprsim_core::optics::{
    beam_radius, compensation_length, parse_length, rayleigh_range, walkoff_path, BeamParams,
    DesignRow, WalkoffParams,
};

use crate::commands::CliError;

#[derive(Args, Debug)]
pub struct DesignArgs {
    #[command(subcommand)]
    quantity: Quantity,
}

#[derive(Args, Debug)]
struct Beam {
    /// Waist radius (accepts nm, um, mm or m suffixes).
    #[arg(long, default_value = "12.4um", value_parser = length)]
    w0: f64,
    /// Vacuum wavelength.
    #[arg(long, default_value = "390nm", value_parser = length)]
    wavelength: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    /// Periodically poled KTP, pump 0.41c, signal 0.52c.
    Ppktp,
}

#[derive(Subcommand, Debug)]
enum Quantity {
    /// Rayleigh range πw₀²/λ.
    Rayleigh {
        #[command(flatten)]
        beam: Beam,
    },
    /// Beam radius at distance z from the waist.
    Radius {
        #[arg(long, value_parser = length, allow_hyphen_values = true)]
        z: f64,
        #[command(flatten)]
        beam: Beam,
    },
    /// Pump/signal walk-off path accumulated through one crystal.
    Walkoff {
        /// Crystal length.
        #[arg(long, default_value = "1mm", value_parser = length)]
        length: f64,
        #[arg(long, value_enum, default_value_t = Preset::Ppktp)]
        preset: Preset,
        /// Pump group velocity as a fraction of c (overrides the preset).
        #[arg(long)]
        v_pump: Option<f64>,
        /// Signal group velocity as a fraction of c (overrides the preset).
        #[arg(long)]
        v_signal: Option<f64>,
    },
    /// Birefringent crystal length that cancels a given delay.
    Compensation {
        /// Delay to cancel, as a free-space path length.
        #[arg(long, value_parser = length, allow_hyphen_values = true)]
        delay: f64,
        /// Group-index difference of the compensator.
        #[arg(long, allow_hyphen_values = true)]
        delta_n: f64,
    },
}

fn length(token: &str) -> Result<f64, String> {
    parse_length(token).map_err(|e| e.to_string())
}

fn rows(quantity: &Quantity) -> Result<Vec<DesignRow>, CliError> {
    Ok(match quantity {
        Quantity::Rayleigh { beam } => {
            let b = BeamParams::new(beam.w0, beam.wavelength)?;
            vec![DesignRow::new("rayleigh_range", rayleigh_range(&b), "m")]
        }
        Quantity::Radius { z, beam } => {
            let b = BeamParams::new(beam.w0, beam.wavelength)?;
            let w = beam_radius(*z, &b);
            vec![
                DesignRow::new("rayleigh_range", rayleigh_range(&b), "m"),
                DesignRow::new("beam_radius", w, "m"),
                DesignRow::new("radius_over_waist", w / b.w0, "1"),
            ]
        }
        Quantity::Walkoff {
            length,
            preset,
            v_pump,
            v_signal,
        } => {
            let base = match preset {
                Preset::Ppktp => WalkoffParams::ppktp(*length)?,
            };
            let params = WalkoffParams::new(
                *length,
                v_pump.unwrap_or(base.v_pump),
                v_signal.unwrap_or(base.v_signal),
            )?;
            vec![DesignRow::new("walkoff_path", walkoff_path(&params), "m")]
        }
        Quantity::Compensation { delay, delta_n } => vec![DesignRow::new(
            "compensation_length",
            compensation_length(*delay, *delta_n)?,
            "m",
        )],
    })
}

pub fn run(args: &DesignArgs) -> Result<(), CliError> {
    let rows = rows(&args.quantity)?;
    let text = serde_json::to_string_pretty(&rows).map_err(eprsim_core::Error::from)?;
    println!("{text}");
    Ok(())
}
