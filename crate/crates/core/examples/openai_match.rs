//! One match against an OpenAI-compatible endpoint.
//!
//! ```sh
//! ARENA_API_KEY=... cargo run --example openai_match -- https://api.openai.com/v1/chat/completions gpt-4
//! ```
//!
//! Completions are cached under `runs/cache`, so a second run makes no requests.

use std::sync::Arc;

use arena_core::agents::AgentSpec;
use arena_core::engine::{play_match, MatchConfig, MatchContext};
use arena_core::game::PayoffGame;
use arena_core::prompting::Templates;
use arena_core::provider::{ClientOptions, CompletionClient, OpenAiProvider, ProviderOptions, ProviderParams};
use arena_core::report::round_table;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let (Some(endpoint), Some(model)) = (args.next(), args.next()) else {
        eprintln!("usage: openai_match <endpoint> <model>");
        std::process::exit(2);
    };
    let backend = OpenAiProvider::from_env("remote", endpoint).map_err(anyhow::Error::msg)?;
    let mut client =
        CompletionClient::new(ClientOptions { cache_dir: Some("runs/cache".into()), ..Default::default() });
    let options = ProviderOptions { requests_per_second: Some(2.0), burst: 1, ..Default::default() };
    client.register(Arc::new(backend), ProviderParams::new(model), options)?;

    let templates = Templates::base();
    let cfg = MatchConfig::new(
        "pd",
        PayoffGame::prisoners_dilemma(),
        AgentSpec::Llm { provider: "remote".into() },
        AgentSpec::DefectThenCooperate,
    );
    let out = play_match(&cfg, MatchContext { client: Some(&client), templates: &templates })?;
    print!("{}", round_table(&out.transcript));
    println!("requests sent: {}", client.network_calls());
    Ok(())
}
