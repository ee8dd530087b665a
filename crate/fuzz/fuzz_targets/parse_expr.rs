#![no_main]

use libfuzzer_sys::fuzz_target;
use varmech_cli::expr::Env;
use varmech_cli::parse_expr;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match parse_expr(text) {
        Ok(e) => {
            // Printing must produce text that parses again.
            let printed = e.to_string();
            let back = parse_expr(&printed).expect("printed expression reparses");
            let env = Env {
                t: 0.5,
                h: 0.1,
                q: &[0.3, -0.7, 1.1],
                y: &[0.2, 0.9, -0.4],
                p: &[0.6],
                u: &[-0.1],
            };
            let (a, b) = (e.eval(&env), back.eval(&env));
            assert!(a == b || (a.is_nan() && b.is_nan()) || (a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
        Err(err) => assert!(err.pos <= text.len()),
    }
});
