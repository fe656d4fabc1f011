//! LL(1) recursive-descent parser. It builds the model structurally; semantic
//! checks live in `check`.

use crate::chart::{ArgValue, Atom, EventTemplate, Guard, StateChart, SystemModel, Transition, Value};

use super::lexer::{tokenize, Tok, Token};
use super::{ChartSpans, EmitSpans, ModelSpans, SourceSpan, StateSpans, TransitionSpans};

#[derive(Debug, Clone)]
pub(crate) struct ParseError {
    pub code: &'static str,
    pub span: SourceSpan,
    pub message: String,
}

type PResult<T> = Result<T, ParseError>;

pub(crate) fn parse_structure(src: &str) -> PResult<(SystemModel, ModelSpans)> {
    let tokens = tokenize(src).map_err(|e| ParseError {
        code: "lex",
        span: e.span,
        message: e.message,
    })?;
    let mut p = Parser { tokens, pos: 0 };
    p.model()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

fn describe(expected: &[&str]) -> String {
    let quoted: Vec<String> = expected.iter().map(|e| format!("`{e}`")).collect();
    match quoted.as_slice() {
        [one] => one.clone(),
        many => format!("one of {}", many.join(", ")),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn span(&self) -> SourceSpan {
        self.tokens[self.pos].span
    }

    fn prev_end(&self) -> usize {
        self.pos.checked_sub(1).map_or(0, |i| self.tokens[i].span.end)
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(ParseError {
            code: "syntax",
            span: self.span(),
            message: format!("unexpected {}; expected {}", self.peek(), describe(expected)),
        })
    }

    fn expect(&mut self, tok: Tok) -> PResult<SourceSpan> {
        if *self.peek() == tok {
            Ok(self.bump().span)
        } else {
            self.unexpected(&[tok.text()])
        }
    }

    fn ident(&mut self) -> PResult<(String, SourceSpan)> {
        match self.peek().clone() {
            Tok::Ident(name) => Ok((name, self.bump().span)),
            _ => self.unexpected(&["identifier"]),
        }
    }

    fn model(&mut self) -> PResult<(SystemModel, ModelSpans)> {
        let mut model = SystemModel::default();
        let mut spans = ModelSpans::default();
        loop {
            let (chart, chart_spans) = self.chart()?;
            model.charts.push(chart);
            spans.charts.push(chart_spans);
            match self.peek() {
                Tok::Eof => break,
                Tok::Statechart => continue,
                _ => return self.unexpected(&["statechart", "end of input"]),
            }
        }
        Ok((model, spans))
    }

    fn chart(&mut self) -> PResult<(StateChart, ChartSpans)> {
        let start = self.expect(Tok::Statechart)?.start;
        let (name, name_span) = self.ident()?;
        self.expect(Tok::LBrace)?;
        self.expect(Tok::Initial)?;
        let (initial, initial_span) = self.ident()?;
        let mut chart = StateChart::new(name, initial);
        let mut spans = ChartSpans {
            name: name_span,
            initial: initial_span,
            ..Default::default()
        };
        loop {
            match self.peek() {
                Tok::State => self.state(&mut chart, &mut spans)?,
                Tok::RBrace => break,
                _ => return self.unexpected(&["state", "}"]),
            }
        }
        let end = self.bump().span.end;
        spans.whole = SourceSpan::new(start, end);
        Ok((chart, spans))
    }

    fn state(&mut self, chart: &mut StateChart, spans: &mut ChartSpans) -> PResult<()> {
        let start = self.expect(Tok::State)?.start;
        let (name, name_span) = self.ident()?;
        if *self.peek() == Tok::LBrace {
            self.bump();
            loop {
                match self.peek() {
                    Tok::On => {
                        let (t, ts) = self.transition(&name)?;
                        chart.transitions.push(t);
                        spans.transitions.push(ts);
                    }
                    Tok::RBrace => break,
                    _ => return self.unexpected(&["on", "}"]),
                }
            }
            self.bump();
        }
        chart.states.push(name);
        spans.states.push(StateSpans {
            whole: SourceSpan::new(start, self.prev_end()),
            name: name_span,
        });
        Ok(())
    }

    fn transition(&mut self, source: &str) -> PResult<(Transition, TransitionSpans)> {
        let start = self.expect(Tok::On)?.start;
        let (event, event_span) = self.ident()?;
        let mut transition = Transition::new(source, event, "");
        let mut spans = TransitionSpans {
            event: event_span,
            ..Default::default()
        };
        if *self.peek() == Tok::LBracket {
            self.bump();
            let mut atoms = Vec::new();
            loop {
                let (atom, span) = self.atom()?;
                atoms.push(atom);
                spans.atoms.push(span);
                match self.peek() {
                    Tok::AndAnd => {
                        self.bump();
                    }
                    Tok::RBracket => break,
                    _ => return self.unexpected(&["&&", "]"]),
                }
            }
            self.bump();
            transition.guard = Some(Guard::new(atoms));
        }
        match self.peek() {
            Tok::Slash => {
                self.bump();
                loop {
                    let (tpl, es) = self.emit()?;
                    transition.emits.push(tpl);
                    spans.emits.push(es);
                    match self.peek() {
                        Tok::Comma => {
                            self.bump();
                        }
                        Tok::Arrow => break,
                        _ => return self.unexpected(&[",", "->"]),
                    }
                }
            }
            Tok::Arrow => {}
            _ if transition.guard.is_none() => return self.unexpected(&["[", "/", "->"]),
            _ => return self.unexpected(&["/", "->"]),
        }
        self.expect(Tok::Arrow)?;
        let (target, target_span) = self.ident()?;
        transition.target = target;
        spans.target = target_span;
        spans.whole = SourceSpan::new(start, target_span.end);
        Ok((transition, spans))
    }

    fn atom(&mut self) -> PResult<(Atom, SourceSpan)> {
        let start = self.span().start;
        match self.peek().clone() {
            Tok::In => {
                self.bump();
                self.expect(Tok::LParen)?;
                let (chart, _) = self.ident()?;
                self.expect(Tok::Dot)?;
                let (state, _) = self.ident()?;
                let end = self.expect(Tok::RParen)?.end;
                Ok((Atom::InState { chart, state }, SourceSpan::new(start, end)))
            }
            Tok::Ident(field) => {
                self.bump();
                let op = match self.peek() {
                    Tok::Cmp(op) => *op,
                    _ => return self.unexpected(&["==", "!=", "<", "<=", ">", ">="]),
                };
                self.bump();
                let value = self.literal()?;
                Ok((Atom::Compare { field, op, value }, SourceSpan::new(start, self.prev_end())))
            }
            _ => self.unexpected(&["identifier", "in"]),
        }
    }

    fn literal(&mut self) -> PResult<Value> {
        let v = match self.peek() {
            Tok::True => Value::Bool(true),
            Tok::False => Value::Bool(false),
            Tok::Int(i) => Value::Int(*i),
            _ => return self.unexpected(&["true", "false", "integer"]),
        };
        self.bump();
        Ok(v)
    }

    fn emit(&mut self) -> PResult<(EventTemplate, EmitSpans)> {
        let start = self.expect(Tok::Emit)?.start;
        let (name, _) = self.ident()?;
        let mut tpl = EventTemplate::new(name);
        let mut spans = EmitSpans::default();
        if *self.peek() == Tok::LParen {
            self.bump();
            loop {
                let (field, fspan) = self.ident()?;
                self.expect(Tok::Assign)?;
                let value = if *self.peek() == Tok::Dollar {
                    self.bump();
                    ArgValue::Field(self.ident()?.0)
                } else {
                    match self.peek() {
                        Tok::True | Tok::False | Tok::Int(_) => ArgValue::Literal(self.literal()?),
                        _ => return self.unexpected(&["true", "false", "integer", "$"]),
                    }
                };
                tpl.args.push((field, value));
                spans.args.push(SourceSpan::new(fspan.start, self.prev_end()));
                match self.peek() {
                    Tok::Comma => {
                        self.bump();
                    }
                    Tok::RParen => break,
                    _ => return self.unexpected(&[",", ")"]),
                }
            }
            self.bump();
        }
        spans.whole = SourceSpan::new(start, self.prev_end());
        Ok((tpl, spans))
    }
}
