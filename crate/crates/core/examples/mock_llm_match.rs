//! A chat-model seat played end to end by an offline mock, going through the same prompt
//! path as a real endpoint.
//!
//! `cargo run --example mock_llm_match`

use std::sync::Arc;

use arena_core::agents::AgentSpec;
use arena_core::engine::{play_match, MatchConfig, MatchContext};
use arena_core::game::PayoffGame;
use arena_core::prompting::{PredictionMode, Templates};
use arena_core::provider::{ClientOptions, CompletionClient, MockProvider, Predictor, ProviderOptions, ProviderParams};
use arena_core::report::round_table;

fn main() -> anyhow::Result<()> {
    let templates = Templates::base();
    let mock = MockProvider::policy("mock", AgentSpec::Constant { action: 0 }, Predictor::RepeatLast, &templates)
        .map_err(anyhow::Error::msg)?;
    let mut client = CompletionClient::new(ClientOptions { offline: true, ..Default::default() });
    client.register(Arc::new(mock), ProviderParams::new("mock"), ProviderOptions::default())?;

    let mut cfg = MatchConfig::new(
        "bos",
        PayoffGame::battle_of_the_sexes(),
        AgentSpec::Llm { provider: "mock".into() },
        AgentSpec::Alternator,
    );
    cfg.prediction[0] = PredictionMode::PredictThenAct;
    let out = play_match(&cfg, MatchContext { client: Some(&client), templates: &templates })?;
    print!("{}", round_table(&out.transcript));
    println!("\nlast prompt sent:\n{}", out.completions.last().unwrap().prompt);
    println!("provider calls: {}", client.backend_calls());
    Ok(())
}
