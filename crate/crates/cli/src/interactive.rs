//! Terminal feedback loop.
//!
//! Each round prints the summary, then reads one command line:
//!
//! - empty line or `next`: answer this round's queries
//! - `drop <sent_id>...`: reject sentences with the next batch
//! - `budget words N` / `budget sentences N`: change the budget
//! - `done`: finish with the current summary
//!
//! A query is answered with `a [weight]`, `r [weight]` or an empty line to
//! skip it. Weights default to 1. `done` at a query prompt submits the
//! answers given so far and finishes; so does end of input.

use std::io::{BufRead, Write};
use std::path::Path;

use adasum::feedback::{Feedback, FeedbackBatch};
use adasum::optimizer::Budget;
use adasum::session::{Query, Session};

type Result<T> = std::result::Result<T, String>;

pub fn run(mut session: Session, input: &mut impl BufRead, out: &mut impl Write, save: Option<&Path>) -> Result<()> {
    let mut drops: Vec<usize> = Vec::new();
    loop {
        show(&session, out)?;
        if session.is_terminated() {
            break;
        }
        say(out, "> ")?;
        let Some(line) = read_line(input)? else {
            session.mark_satisfied();
            break;
        };
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            [] | ["next"] => {
                let queries = session.next_queries(session.config().query_batch_size).map_err(|e| e.to_string())?;
                let (feedback, finished) = ask(&session, &queries, input, out)?;
                let batch = FeedbackBatch { feedback, reject_sentences: std::mem::take(&mut drops) };
                if let Err(e) = session.submit_feedback(batch) {
                    say(out, &format!("rejected: {e}\n"))?;
                }
                persist(&session, save)?;
                if finished {
                    session.mark_satisfied();
                    break;
                }
            }
            ["done"] => {
                session.mark_satisfied();
                break;
            }
            ["drop", ids @ ..] if !ids.is_empty() => match ids.iter().map(|s| s.parse::<usize>()).collect::<std::result::Result<Vec<_>, _>>() {
                Ok(ids) => drops.extend(ids),
                Err(_) => say(out, "drop takes sentence ids\n")?,
            },
            ["budget", mode, n] => {
                let budget = n.parse().ok().and_then(|n| match *mode {
                    "words" => Budget::words(n).ok(),
                    "sentences" => Budget::sentences(n).ok(),
                    _ => None,
                });
                match budget {
                    Some(b) => {
                        session.amend_budget(b).map_err(|e| e.to_string())?;
                        persist(&session, save)?;
                    }
                    None => say(out, "usage: budget words|sentences N\n")?,
                }
            }
            _ => say(out, "commands: next, drop <ids>, budget words|sentences N, done\n")?,
        }
    }
    persist(&session, save)?;
    say(out, &format!("final ({}):\n{}\n", session.termination().map(|t| t.to_string()).unwrap_or_default(), session.summary_text()))
}

fn show(session: &Session, out: &mut impl Write) -> Result<()> {
    let sel = session.selection();
    let mut text = format!(
        "\niteration {}  score {:.3}  used {} of {}\n",
        session.iteration(),
        session.display_score(),
        sel.used_budget,
        session.config().budget.limit()
    );
    for &sid in &sel.sent_ids {
        if let Some(s) = session.corpus().sentence(sid) {
            text.push_str(&format!("  [{sid}] {}\n", s.text));
        }
    }
    say(out, &text)
}

/// Returns the answers and whether the user is finished (`done` or end of
/// input).
fn ask(session: &Session, queries: &[Query], input: &mut impl BufRead, out: &mut impl Write) -> Result<(Vec<Feedback>, bool)> {
    let mut answers = Vec::new();
    for q in queries {
        let source = session.corpus().sentence(q.context.source_sentence).map(|s| s.text.as_str()).unwrap_or("");
        say(out, &format!("{}  (from: {source})\n  a/r [weight], enter to skip: ", q.concept.key))?;
        loop {
            let Some(line) = read_line(input)? else {
                return Ok((answers, true));
            };
            if line == "done" {
                return Ok((answers, true));
            }
            match parse_answer(&line) {
                Ok(Some(f)) => {
                    answers.push(Feedback::new(q.concept.key.clone(), f.0, f.1));
                    break;
                }
                Ok(None) => break,
                Err(m) => say(out, &format!("{m}: "))?,
            }
        }
    }
    Ok((answers, false))
}

fn parse_answer(line: &str) -> std::result::Result<Option<(adasum::feedback::Action, f64)>, &'static str> {
    use adasum::feedback::Action;
    let words: Vec<&str> = line.split_whitespace().collect();
    let action = match words.first() {
        None => return Ok(None),
        Some(&"a") | Some(&"accept") => Action::Accept,
        Some(&"r") | Some(&"reject") => Action::Reject,
        _ => return Err("answer a or r"),
    };
    let weight = match words.get(1) {
        None => 1.0,
        Some(w) => w.parse::<f64>().map_err(|_| "weight must be a number")?,
    };
    if !(0.0..=1.0).contains(&weight) || words.len() > 2 {
        return Err("weight must be in [0, 1]");
    }
    Ok(Some((action, weight)))
}

fn read_line(input: &mut impl BufRead) -> Result<Option<String>> {
    let mut line = String::new();
    match input.read_line(&mut line) {
        Ok(0) => Ok(None),
        Ok(_) => Ok(Some(line.trim().to_string())),
        Err(e) => Err(e.to_string()),
    }
}

fn say(out: &mut impl Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| e.to_string())
}

fn persist(session: &Session, save: Option<&Path>) -> Result<()> {
    match save {
        Some(path) => session.save(path).map_err(|e| e.to_string()),
        None => Ok(()),
    }
}
