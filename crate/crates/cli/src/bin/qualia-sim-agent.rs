//! Stdio test agent. Perceives each image with the default bias model, or
//! guesses uniformly with `--guess`.

use std::io::{stdin, stdout};

use qualia_core::agents::{serve_wire_agent, vision};
use qualia_core::stimulus::BiasModel;

fn main() {
    let guess = std::env::args().any(|a| a == "--guess");
    let bias = BiasModel::default();
    let mut n: u64 = 0;
    let respond = |prompt: &str, choices: &[String], png: &[u8]| {
        n += 1;
        if guess {
            // Cheap deterministic spread over the choices.
            return (n.wrapping_mul(0x9e37_79b9_7f4a_7c15) >> 33) as usize % choices.len().max(1);
        }
        vision::perceive(prompt, choices, png, &bias).unwrap_or(0)
    };
    match serve_wire_agent(stdin().lock(), stdout().lock(), respond) {
        Ok(_) => {}
        Err(e) => {
            eprintln!("qualia-sim-agent: {e}");
            std::process::exit(2);
        }
    }
}
