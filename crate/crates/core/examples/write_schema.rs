//! Prints the JSON Schema of scenario files.
//!
//! ```text
//! cargo run --example write_schema > docs/scenario.schema.json
//! ```

fn main() {
    let schema = hyperbolic1d::scenario::scenario_schema();
    println!("{}", serde_json::to_string_pretty(&schema).expect("schema serializes"));
}
