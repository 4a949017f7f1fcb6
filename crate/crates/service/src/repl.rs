use std::io::{self, BufRead, Write};

use crate::engine::{Engine, PipelineError};

fn report(out: &mut impl Write, err: &PipelineError) -> io::Result<()> {
    writeln!(out, "error [{}] {}", err.stage(), err)?;
    if let Some(words) = err.conjunction_suggestions() {
        writeln!(
            out,
            "hint: teach a conjunction with `:add-conjunction <word>`{}",
            if words.is_empty() {
                String::new()
            } else {
                format!(" (maybe: {})", words.join(", "))
            }
        )?;
    }
    Ok(())
}

fn read_line(input: &mut impl BufRead) -> io::Result<Option<String>> {
    let mut line = String::new();
    if input.read_line(&mut line)? == 0 {
        return Ok(None);
    }
    Ok(Some(line.trim().to_string()))
}

/// Interactive loop: query -> SQL -> results -> accept/reject. Ends on EOF
/// or `:quit`.
pub fn run_repl(engine: &Engine, mut input: impl BufRead, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "flexible query console; :quit to leave, :add-conjunction <word> to teach a conjunction")?;
    loop {
        write!(out, "flexq> ")?;
        out.flush()?;
        let Some(line) = read_line(&mut input)? else {
            break;
        };
        if line.is_empty() {
            continue;
        }
        if matches!(line.as_str(), ":quit" | ":q" | "quit" | "exit") {
            break;
        }
        if let Some(word) = line.strip_prefix(":add-conjunction") {
            match engine.add_conjunction(word.trim()) {
                Ok(_) => writeln!(out, "added conjunction '{}'", word.trim().to_lowercase())?,
                Err(e) => report(&mut out, &e)?,
            }
            continue;
        }

        let resp = match engine.translate(&line) {
            Ok(r) => r,
            Err(e) => {
                report(&mut out, &e)?;
                continue;
            }
        };
        writeln!(out, "SQL: {}", resp.sql)?;
        writeln!(out, "source: {}", resp.source.as_str())?;
        for w in &resp.warnings {
            writeln!(out, "warning: {w}")?;
        }
        match engine.execute(&resp.query_id) {
            Ok(rs) => write!(out, "{}", rs.to_grid())?,
            Err(e) => {
                report(&mut out, &e)?;
                continue;
            }
        }

        write!(out, "accept/reject? [a/r/Enter to skip] ")?;
        out.flush()?;
        let Some(answer) = read_line(&mut input)? else {
            break;
        };
        let verdict = match answer.to_lowercase().as_str() {
            "a" | "accept" | "y" | "yes" => "accept",
            "r" | "reject" | "n" | "no" => "reject",
            _ => continue,
        };
        match engine.feedback(&resp.query_id, verdict, None) {
            Ok(s) => writeln!(
                out,
                "recorded: {} (accepts {}, rejects {})",
                s.status.as_str(),
                s.accepts,
                s.rejects
            )?,
            Err(e) => report(&mut out, &e)?,
        }
    }
    writeln!(out)?;
    Ok(())
}
