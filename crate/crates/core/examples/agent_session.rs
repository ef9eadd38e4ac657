//! Two-turn session: analyse a rubbing, then ask which catalogues record
//! the first detected character without uploading it again.
//!
//!     cargo run --example agent_session -p scriptorium

use scriptorium::agent::{Agent, ImageInput, SessionState, TurnInput};
use scriptorium::synth::{generate_corpus, SynthConfig};

fn main() -> scriptorium::error::Result<()> {
    let corpus = generate_corpus(&SynthConfig::default())?;
    let kb = corpus.build_snapshot()?;
    let rubbing = corpus.images[&corpus.ground_truth.fragments[0].rubbing_ref].clone();

    let agent = Agent::new(kb);
    let mut session = SessionState::new("demo");

    let first = agent.run_turn(
        &mut session,
        TurnInput::text("Please analyze this rubbing.").with_image(ImageInput::Raster(rubbing)),
    )?;
    println!("turn {} [{}]", first.turn, first.goal.intent.as_str());
    for e in &first.trace {
        println!("  group {} {} {:?}", e.group, e.tool, e.status);
    }
    println!("{}\n", first.response);

    let second = agent.run_turn(&mut session, TurnInput::text("Which catalogues record this character?"))?;
    println!("turn {} [{}] referenced {:?}", second.turn, second.goal.intent.as_str(), second.referenced);
    for e in &second.trace {
        println!("  group {} {} {:?} {:?}", e.group, e.tool, e.status, e.args);
    }
    println!("{}", second.response);
    Ok(())
}
