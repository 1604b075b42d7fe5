//! Unified WSD XML plus gold key to the JSONL dataset format.

use std::collections::HashMap;

use anyhow::{anyhow, bail, Context, Result};
use domwsd::lexicon::WsdRecord;
use domwsd::{Pos, SynsetId};
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

struct Token {
    text: String,
    instance: Option<(String, String, String)>,
}

fn attrs(e: &BytesStart) -> Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for a in e.attributes() {
        let a = a?;
        out.insert(
            String::from_utf8_lossy(a.key.as_ref()).into_owned(),
            a.unescape_value()?.into_owned(),
        );
    }
    Ok(out)
}

/// Sentences as token lists, in document order.
fn parse_xml(xml: &str) -> Result<Vec<Vec<Token>>> {
    let mut reader = Reader::from_str(xml);
    let mut sentences: Vec<Vec<Token>> = Vec::new();
    let mut current: Option<Token> = None;
    loop {
        let pos = reader.buffer_position();
        match reader.read_event().with_context(|| format!("XML error near byte {pos}"))? {
            Event::Start(e) => match e.name().as_ref() {
                b"sentence" => sentences.push(Vec::new()),
                b"wf" => {
                    current = Some(Token {
                        text: String::new(),
                        instance: None,
                    })
                }
                b"instance" => {
                    let a = attrs(&e)?;
                    let get = |k: &str| a.get(k).cloned().ok_or_else(|| anyhow!("instance without {k} attribute"));
                    current = Some(Token {
                        text: String::new(),
                        instance: Some((get("id")?, get("lemma")?, get("pos")?)),
                    });
                }
                _ => {}
            },
            Event::Text(t) => {
                if let Some(tok) = current.as_mut() {
                    tok.text.push_str(&t.unescape()?);
                }
            }
            Event::End(e) if matches!(e.name().as_ref(), b"wf" | b"instance") => {
                let tok = current.take().expect("token open");
                sentences
                    .last_mut()
                    .ok_or_else(|| anyhow!("token outside a sentence"))?
                    .push(tok);
            }
            Event::Eof => break,
            _ => {}
        }
    }
    Ok(sentences)
}

/// Sense key to synset id, from a WordNet `index.sense` file.
pub fn parse_sense_index(text: &str) -> Result<HashMap<String, SynsetId>> {
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let (Some(key), Some(offset)) = (parts.next(), parts.next()) else {
            continue;
        };
        let pos = sense_key_pos(key).with_context(|| format!("sense index line {}", i + 1))?;
        let offset: u32 = offset
            .parse()
            .with_context(|| format!("sense index line {}: bad offset {offset:?}", i + 1))?;
        let id = SynsetId::new(offset, pos).ok_or_else(|| anyhow!("offset {offset} out of range"))?;
        out.insert(key.to_string(), id);
    }
    Ok(out)
}

/// POS from the synset type digit of a sense key (`lemma%1:...`).
fn sense_key_pos(key: &str) -> Result<Pos> {
    let ty = key
        .split_once('%')
        .and_then(|(_, rest)| rest.chars().next())
        .ok_or_else(|| anyhow!("malformed sense key {key:?}"))?;
    Ok(match ty {
        '1' => Pos::Noun,
        '2' => Pos::Verb,
        '3' | '5' => Pos::Adj,
        '4' => Pos::Adv,
        _ => bail!("malformed sense key {key:?}"),
    })
}

fn parse_gold(text: &str, index: Option<&HashMap<String, SynsetId>>) -> Result<HashMap<String, Vec<String>>> {
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let Some(id) = parts.next() else { continue };
        let mut gold = Vec::new();
        for key in parts {
            let sid = match (key.parse::<SynsetId>(), index) {
                (Ok(s), _) => s,
                (Err(_), Some(idx)) => *idx
                    .get(key)
                    .ok_or_else(|| anyhow!("gold line {}: sense key {key:?} not in sense index", i + 1))?,
                (Err(_), None) => bail!("gold line {}: {key:?} is not a synset id and no sense index was given", i + 1),
            };
            gold.push(sid.to_string());
        }
        if gold.is_empty() {
            bail!("gold line {}: no senses for {id}", i + 1);
        }
        out.insert(id.to_string(), gold);
    }
    Ok(out)
}

/// One record per `<instance>`. The context is the sentence with tokens
/// joined by single spaces; offsets count characters.
pub fn convert(xml: &str, gold_key: &str, index: Option<&HashMap<String, SynsetId>>) -> Result<Vec<WsdRecord>> {
    let gold = parse_gold(gold_key, index)?;
    let mut records = Vec::new();
    for sentence in parse_xml(xml)? {
        let texts: Vec<&str> = sentence.iter().map(|t| t.text.trim()).collect();
        let context = texts.join(" ");
        let mut offset = 0;
        for (tok, text) in sentence.iter().zip(&texts) {
            let len = text.chars().count();
            if let Some((id, lemma, pos)) = &tok.instance {
                let g = gold.get(id).ok_or_else(|| anyhow!("instance {id} has no gold key"))?;
                let pos: Pos = pos.parse().map_err(|_| anyhow!("instance {id}: unknown POS {pos:?}"))?;
                records.push(WsdRecord {
                    id: id.clone(),
                    lemma: lemma.clone(),
                    pos: pos.as_char().to_string(),
                    context: context.clone(),
                    target_start: offset,
                    target_end: offset + len,
                    gold: g.clone(),
                });
            }
            offset += len + 1;
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    const XML: &str = r#"<?xml version="1.0" encoding="UTF-8" ?>
<corpus lang="en" source="toy">
<text id="d000">
<sentence id="d000.s000">
<wf lemma="the" pos="DET">The</wf>
<instance id="d000.s000.t000" lemma="cell" pos="NOUN">cell</instance>
<wf lemma="divide" pos="VERB">divided</wf>
<wf lemma="." pos=".">.</wf>
</sentence>
<sentence id="d000.s001">
<wf lemma="a" pos="DET">A</wf>
<instance id="d000.s001.t000" lemma="cell_phone" pos="NOUN">cell phone</instance>
<instance id="d000.s001.t001" lemma="ring" pos="VERB">rang</instance>
</sentence>
</text>
</corpus>"#;

    #[test]
    fn converts_instances_with_char_offsets() {
        let index = parse_sense_index("cell%1:03:00:: 00006484 1 40\ncell_phone%1:06:00:: 02992529 1 0\n").unwrap();
        let gold = "d000.s000.t000 cell%1:03:00::\nd000.s001.t000 cell_phone%1:06:00::\nd000.s001.t001 00000042-v\n";
        let recs = convert(XML, gold, Some(&index)).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].context, "The cell divided .");
        assert_eq!((recs[0].target_start, recs[0].target_end), (4, 8));
        assert_eq!(recs[0].gold, ["00006484-n"]);
        assert_eq!(recs[1].context, "A cell phone rang");
        assert_eq!(&recs[1].context[recs[1].target_start..recs[1].target_end], "cell phone");
        assert_eq!(recs[2].pos, "v");
        assert_eq!(recs[2].gold, ["00000042-v"]);
    }

    #[test]
    fn missing_gold_is_an_error() {
        assert!(convert(XML, "d000.s000.t000 00006484-n\n", None).is_err());
        assert!(convert(XML, "d000.s000.t000 cell%1:03:00::\n", None).is_err());
    }

    #[test]
    fn satellite_keys_are_adjectives() {
        let idx = parse_sense_index("big%5:00:01:large:00 01382086 2 5\n").unwrap();
        assert_eq!(idx["big%5:00:01:large:00"].to_string(), "01382086-a");
    }
}
