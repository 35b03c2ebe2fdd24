use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use folk_core::transport::UreqTransport;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let env: HashMap<String, String> = std::env::vars().collect();
    let transport = Arc::new(UreqTransport::new(Duration::from_secs(60)));
    let code = folk_cli::execute(&args, &env, transport, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
