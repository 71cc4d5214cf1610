use std::io::{Read, Write};
use std::path::Path;

use super::{DataError, MessageKind, MessageRecord};
use crate::types::Side;

pub const MESSAGE_HEADER: &str = "ts_ns,kind,order_id,side,price_ticks,qty";

/// Parses the message CSV. Records keep file order; timestamps must be
/// non-decreasing.
pub fn parse_messages<R: Read>(input: R) -> Result<Vec<MessageRecord>, DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut rows = reader.records();
    match rows.next() {
        Some(Ok(h)) if h.iter().eq(MESSAGE_HEADER.split(',')) => {}
        Some(Err(e)) => return Err(e.into()),
        _ => return Err(DataError::Header { expected: MESSAGE_HEADER }),
    }
    let mut out = Vec::new();
    let mut last_ts = 0;
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let rec = parse_row(&row).map_err(|message| DataError::Parse { line, message })?;
        if rec.ts < last_ts {
            return Err(DataError::Parse {
                line,
                message: format!("timestamp {} decreases (previous {})", rec.ts, last_ts),
            });
        }
        last_ts = rec.ts;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_messages(path: impl AsRef<Path>) -> Result<Vec<MessageRecord>, DataError> {
    parse_messages(std::fs::File::open(path)?)
}

fn parse_row(row: &csv::StringRecord) -> Result<MessageRecord, String> {
    if row.len() != 6 {
        return Err(format!("expected 6 fields, found {}", row.len()));
    }
    let ts = row[0].parse::<u64>().map_err(|_| format!("bad timestamp `{}`", &row[0]))?;
    let kind = match &row[1] {
        "ADD" => MessageKind::Add,
        "CANCEL" => MessageKind::Cancel,
        "REDUCE" => MessageKind::Reduce,
        other => return Err(format!("unknown kind `{other}`")),
    };
    let order_id = row[2].parse::<u64>().map_err(|_| format!("bad order id `{}`", &row[2]))?;
    let side = match &row[3] {
        "B" => Side::Bid,
        "A" => Side::Ask,
        other => return Err(format!("unknown side `{other}`")),
    };
    let price = row[4].parse::<i64>().map_err(|_| format!("bad price `{}`", &row[4]))?;
    let qty = row[5].parse::<i64>().map_err(|_| format!("bad qty `{}`", &row[5]))?;
    if qty < 0 {
        return Err(format!("negative qty {qty}"));
    }
    let qty = qty as u64;
    match kind {
        MessageKind::Add if qty == 0 || price <= 0 => return Err("ADD needs positive price and qty".into()),
        MessageKind::Reduce if qty == 0 => return Err("REDUCE needs positive qty".into()),
        _ => {}
    }
    Ok(MessageRecord { ts, kind, order_id, side, price, qty })
}

/// Writes records as ASCII CSV with LF line endings and no quoting.
pub fn write_messages<W: Write>(mut out: W, records: &[MessageRecord]) -> std::io::Result<()> {
    writeln!(out, "{MESSAGE_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.ts,
            r.kind.as_str(),
            r.order_id,
            r.side.as_char(),
            r.price,
            r.qty
        )?;
    }
    Ok(())
}

pub fn serialize_messages(records: &[MessageRecord]) -> String {
    let mut buf = Vec::with_capacity(records.len() * 40 + 64);
    write_messages(&mut buf, records).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("ascii")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Vec<MessageRecord>, DataError> {
        parse_messages(s.as_bytes())
    }

    #[test]
    fn parses_add_line() {
        let recs =
            parse("ts_ns,kind,order_id,side,price_ticks,qty\n34200000000000,ADD,42,B,10010,100\n").unwrap();
        assert_eq!(
            recs,
            vec![MessageRecord {
                ts: 34_200_000_000_000,
                kind: MessageKind::Add,
                order_id: 42,
                side: Side::Bid,
                price: 10010,
                qty: 100,
            }]
        );
    }

    fn line_of(err: DataError) -> u64 {
        match err {
            DataError::Parse { line, .. } => line,
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn reports_line_numbers() {
        let body = "ts_ns,kind,order_id,side,price_ticks,qty\n1,ADD,1,B,10,5\n2,ADD,2,X,10,5\n";
        assert_eq!(line_of(parse(body).unwrap_err()), 3);
        let neg = "ts_ns,kind,order_id,side,price_ticks,qty\n1,ADD,1,B,10,-5\n";
        assert_eq!(line_of(parse(neg).unwrap_err()), 2);
        let back = "ts_ns,kind,order_id,side,price_ticks,qty\n5,ADD,1,B,10,5\n4,CANCEL,1,B,0,0\n";
        assert_eq!(line_of(parse(back).unwrap_err()), 3);
        let short = "ts_ns,kind,order_id,side,price_ticks,qty\n5,ADD,1,B,10\n";
        assert_eq!(line_of(parse(short).unwrap_err()), 2);
        let kind = "ts_ns,kind,order_id,side,price_ticks,qty\n5,EXECUTE,1,B,10,3\n";
        assert_eq!(line_of(parse(kind).unwrap_err()), 2);
    }

    #[test]
    fn requires_header() {
        assert!(matches!(parse("1,ADD,1,B,10,5\n"), Err(DataError::Header { .. })));
        assert!(matches!(parse(""), Err(DataError::Header { .. })));
    }

    #[test]
    fn cancel_ignores_price_and_qty() {
        let recs = parse("ts_ns,kind,order_id,side,price_ticks,qty\n1,CANCEL,9,A,0,0\n").unwrap();
        assert_eq!(recs[0].kind, MessageKind::Cancel);
    }

    #[test]
    fn writer_is_exact() {
        let recs = vec![MessageRecord {
            ts: 7,
            kind: MessageKind::Reduce,
            order_id: 3,
            side: Side::Ask,
            price: 10020,
            qty: 4,
        }];
        assert_eq!(
            serialize_messages(&recs),
            "ts_ns,kind,order_id,side,price_ticks,qty\n7,REDUCE,3,A,10020,4\n"
        );
    }
}
