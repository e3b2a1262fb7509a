//! Line-oriented SMT-LIB2 REPL over stdin/stdout.

use std::io::{self, BufRead, Write};

use accel_minismt::{parse_sexp, split_commands, Reply, Solver};

fn main() -> io::Result<()> {
    let stdin = io::stdin();
    let mut reader = stdin.lock();
    let stdout = io::stdout();
    let mut writer = stdout.lock();

    let mut solver = Solver::new();
    let mut buf = String::new();
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        buf.push_str(&line);
        for cmd in split_commands(&mut buf) {
            let reply = parse_sexp(&cmd).and_then(|s| solver.execute(&s));
            match reply {
                Ok(Reply::None) => {}
                Ok(Reply::Text(t)) => {
                    writeln!(writer, "{t}")?;
                    writer.flush()?;
                }
                Ok(Reply::Exit) => return Ok(()),
                Err(e) => {
                    writeln!(writer, "(error \"{e}\")")?;
                    writer.flush()?;
                }
            }
        }
    }
}
