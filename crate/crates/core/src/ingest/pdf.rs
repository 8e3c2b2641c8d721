//! Structural PDF reader: just enough of the file format to find the page
//! count and the encryption flag without interpreting content streams.
//!
//! Resolution order for the page count:
//! 1. cross-reference chain (tables and/or xref streams) -> trailer /Root ->
//!    catalog /Pages -> /Count
//! 2. linear scan of every `N G obj` in the file, including objects packed in
//!    object streams, counting dictionaries with `/Type /Page`
//! 3. absent
//!
//! Every path is bounds-checked; malformed input degrades to "absent", it
//! never panics.

use std::collections::{HashMap, HashSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

/// Structural facts about one PDF file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PdfMeta {
    pub page_count: Option<u32>,
    pub encrypted: bool,
    pub file_size: u64,
    pub producer: Option<String>,
}

const MAX_DEPTH: usize = 64;
const MAX_XREF_SECTIONS: usize = 256;
const MAX_DECODED_STREAM: u64 = 256 << 20;

/// Extracts page count, encryption flag and producer from raw bytes.
pub fn extract_pdf_metadata(bytes: &[u8]) -> PdfMeta {
    let mut meta = PdfMeta { page_count: None, encrypted: false, file_size: bytes.len() as u64, producer: None };
    if !has_pdf_header(bytes) {
        return meta;
    }
    let mut doc = Document::new(bytes);
    let trailer = doc.load_xref().or_else(|| doc.scan_trailer());
    if let Some(trailer) = &trailer {
        meta.encrypted = trailer.get(b"Encrypt").is_some();
        meta.producer = doc.producer(trailer);
    }
    if meta.encrypted {
        return meta;
    }
    meta.page_count = trailer.as_ref().and_then(|t| doc.page_tree_count(t)).or_else(|| doc.scan_page_objects());
    meta
}

fn has_pdf_header(bytes: &[u8]) -> bool {
    // Readers tolerate junk before the header within the first KiB.
    let window = &bytes[..bytes.len().min(1024)];
    find(window, b"%PDF-", 0).is_some()
}

#[derive(Clone, Debug, PartialEq)]
enum Object {
    Null,
    Bool(bool),
    Int(i64),
    Real(f64),
    Name(Vec<u8>),
    Str(Vec<u8>),
    Array(Vec<Object>),
    Dict(Dict),
    Ref(u32, u16),
    Stream(Dict, Vec<u8>),
}

impl Object {
    fn as_dict(&self) -> Option<&Dict> {
        match self {
            Object::Dict(d) | Object::Stream(d, _) => Some(d),
            _ => None,
        }
    }

    fn as_int(&self) -> Option<i64> {
        match self {
            Object::Int(i) => Some(*i),
            _ => None,
        }
    }

    fn as_name(&self) -> Option<&[u8]> {
        match self {
            Object::Name(n) => Some(n),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Dict(Vec<(Vec<u8>, Object)>);

impl Dict {
    fn get(&self, key: &[u8]) -> Option<&Object> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    fn is_type(&self, name: &[u8]) -> bool {
        self.get(b"Type").and_then(Object::as_name) == Some(name)
    }
}

#[derive(Clone, Copy, Debug)]
enum XrefEntry {
    Offset(usize),
    Packed { stream: u32, index: usize },
}

struct Document<'a> {
    bytes: &'a [u8],
    xref: HashMap<u32, XrefEntry>,
    scanned: Option<HashMap<u32, usize>>,
    object_streams: HashMap<u32, Option<ObjectStream>>,
}

struct ObjectStream {
    data: Vec<u8>,
    first: usize,
    entries: Vec<(u32, usize)>,
}

impl<'a> Document<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Document { bytes, xref: HashMap::new(), scanned: None, object_streams: HashMap::new() }
    }

    /// Walks the xref chain from the last `startxref`. Returns the merged
    /// trailer (newest section wins) or `None` when the chain is unusable.
    fn load_xref(&mut self) -> Option<Dict> {
        let at = rfind(self.bytes, b"startxref")?;
        let mut p = Parser::new(self.bytes, at + b"startxref".len());
        let mut next = usize::try_from(p.integer()?).ok();
        let mut trailer = Dict::default();
        let mut visited = HashSet::new();
        let mut any = false;
        while let Some(offset) = next.take() {
            if visited.len() >= MAX_XREF_SECTIONS || !visited.insert(offset) {
                break;
            }
            let Some(section) = self.read_xref_section(offset) else { break };
            any = true;
            if let Some(stm) = section.get(b"XRefStm").and_then(Object::as_int) {
                if let Ok(stm) = usize::try_from(stm) {
                    if visited.insert(stm) {
                        let _ = self.read_xref_section(stm);
                    }
                }
            }
            next = section.get(b"Prev").and_then(Object::as_int).and_then(|v| usize::try_from(v).ok());
            for (k, v) in section.0 {
                if k != b"Prev" && trailer.get(&k).is_none() {
                    trailer.0.push((k, v));
                }
            }
        }
        any.then_some(trailer)
    }

    fn read_xref_section(&mut self, offset: usize) -> Option<Dict> {
        let mut p = Parser::new(self.bytes, offset);
        p.skip_ws();
        if p.rest().starts_with(b"xref") {
            p.pos += 4;
            self.read_xref_table(&mut p)
        } else {
            let (_, _, obj) = p.indirect_object()?;
            match obj {
                Object::Stream(dict, data) if dict.is_type(b"XRef") => {
                    self.read_xref_stream(&dict, &data)?;
                    Some(dict)
                }
                _ => None,
            }
        }
    }

    fn read_xref_table(&mut self, p: &mut Parser) -> Option<Dict> {
        loop {
            p.skip_ws();
            if p.rest().starts_with(b"trailer") {
                p.pos += b"trailer".len();
                return match p.object(0)? {
                    Object::Dict(d) => Some(d),
                    _ => None,
                };
            }
            let start = u32::try_from(p.integer()?).ok()?;
            let count = u32::try_from(p.integer()?).ok()?;
            for i in 0..count {
                let off = p.integer()?;
                let _gen = p.integer()?;
                p.skip_ws();
                let kind = *p.rest().first()?;
                p.pos += 1;
                let num = start.checked_add(i)?;
                if kind == b'n' {
                    if let Ok(off) = usize::try_from(off) {
                        self.xref.entry(num).or_insert(XrefEntry::Offset(off));
                    }
                } else if kind != b'f' {
                    return None;
                }
            }
        }
    }

    fn read_xref_stream(&mut self, dict: &Dict, raw: &[u8]) -> Option<()> {
        let data = decode_stream(dict, raw)?;
        let widths: Vec<usize> = match dict.get(b"W")? {
            Object::Array(a) if a.len() == 3 => a
                .iter()
                .map(|o| o.as_int().and_then(|v| usize::try_from(v).ok()).filter(|&w| w <= 8))
                .collect::<Option<_>>()?,
            _ => return None,
        };
        let row = widths.iter().sum::<usize>();
        if row == 0 {
            return None;
        }
        let size = dict.get(b"Size").and_then(Object::as_int)?;
        let ranges: Vec<(i64, i64)> = match dict.get(b"Index") {
            Some(Object::Array(a)) => {
                a.chunks(2).filter_map(|c| Some((c.first()?.as_int()?, c.get(1)?.as_int()?))).collect()
            }
            _ => vec![(0, size)],
        };
        let mut rows = data.chunks_exact(row);
        for (start, count) in ranges {
            if start < 0 || count < 0 {
                return None;
            }
            for i in 0..count {
                let Some(r) = rows.next() else { return Some(()) };
                let f1 = if widths[0] == 0 { 1 } else { be_int(&r[..widths[0]]) };
                let f2 = be_int(&r[widths[0]..widths[0] + widths[1]]);
                let f3 = be_int(&r[widths[0] + widths[1]..]);
                let Ok(num) = u32::try_from(start + i) else { return None };
                let entry = match f1 {
                    1 => usize::try_from(f2).ok().map(XrefEntry::Offset),
                    2 => u32::try_from(f2)
                        .ok()
                        .zip(usize::try_from(f3).ok())
                        .map(|(stream, index)| XrefEntry::Packed { stream, index }),
                    _ => None,
                };
                if let Some(e) = entry {
                    self.xref.entry(num).or_insert(e);
                }
            }
        }
        Some(())
    }

    /// Fallback trailer search for files whose xref chain is broken: the last
    /// `trailer` dictionary, else the last xref stream dictionary, else a
    /// synthetic trailer pointing at the last catalog.
    fn scan_trailer(&mut self) -> Option<Dict> {
        if let Some(at) = rfind(self.bytes, b"trailer") {
            let mut p = Parser::new(self.bytes, at + b"trailer".len());
            if let Some(Object::Dict(d)) = p.object(0) {
                return Some(d);
            }
        }
        let offsets = self.scan_offsets().clone();
        let mut nums: Vec<_> = offsets.iter().collect();
        nums.sort_by_key(|(_, &off)| std::cmp::Reverse(off));
        let mut catalog = None;
        for (&num, &off) in nums {
            let Some((_, gen, obj)) = Parser::new(self.bytes, off).indirect_object() else { continue };
            let Some(d) = obj.as_dict() else { continue };
            if d.is_type(b"XRef") {
                return Some(d.clone());
            }
            if catalog.is_none() && d.is_type(b"Catalog") {
                catalog = Some((num, gen));
            }
        }
        catalog.map(|(num, gen)| Dict(vec![(b"Root".to_vec(), Object::Ref(num, gen))]))
    }

    fn scan_offsets(&mut self) -> &HashMap<u32, usize> {
        if self.scanned.is_none() {
            let mut map = HashMap::new();
            for (num, off) in scan_object_headers(self.bytes) {
                // Later definitions supersede earlier ones (incremental updates).
                map.insert(num, off);
            }
            self.scanned = Some(map);
        }
        self.scanned.as_ref().expect("populated above")
    }

    fn object_at_offset(&self, num: u32, off: usize) -> Option<Object> {
        let (n, _, obj) = Parser::new(self.bytes, off).indirect_object()?;
        (n == num).then_some(obj)
    }

    fn get_object(&mut self, num: u32) -> Option<Object> {
        match self.xref.get(&num).copied() {
            Some(XrefEntry::Offset(off)) => {
                if let Some(o) = self.object_at_offset(num, off) {
                    return Some(o);
                }
            }
            Some(XrefEntry::Packed { stream, index }) => {
                if let Some(o) = self.packed_object(stream, num, Some(index)) {
                    return Some(o);
                }
            }
            None => {}
        }
        let off = *self.scan_offsets().get(&num)?;
        self.object_at_offset(num, off)
    }

    fn packed_object(&mut self, stream: u32, num: u32, index: Option<usize>) -> Option<Object> {
        if !self.object_streams.contains_key(&stream) {
            let loaded = self.load_object_stream(stream);
            self.object_streams.insert(stream, loaded);
        }
        let os = self.object_streams.get(&stream)?.as_ref()?;
        let (n, rel) = match index.and_then(|i| os.entries.get(i)) {
            Some(&(n, rel)) if n == num => (n, rel),
            _ => *os.entries.iter().find(|(n, _)| *n == num)?,
        };
        debug_assert_eq!(n, num);
        Parser::new(&os.data, os.first.checked_add(rel)?).object(0)
    }

    fn load_object_stream(&mut self, stream: u32) -> Option<ObjectStream> {
        // Object streams may not themselves be packed, so resolve by offset.
        let off = match self.xref.get(&stream) {
            Some(XrefEntry::Offset(off)) => *off,
            _ => *self.scan_offsets().get(&stream)?,
        };
        match self.object_at_offset(stream, off)? {
            Object::Stream(dict, raw) => parse_object_stream(&dict, &raw),
            _ => None,
        }
    }

    fn resolve(&mut self, obj: &Object) -> Option<Object> {
        let mut cur = obj.clone();
        for _ in 0..MAX_DEPTH {
            match cur {
                Object::Ref(num, _) => cur = self.get_object(num)?,
                other => return Some(other),
            }
        }
        None
    }

    fn page_tree_count(&mut self, trailer: &Dict) -> Option<u32> {
        let root = self.resolve(trailer.get(b"Root")?)?;
        let pages = self.resolve(root.as_dict()?.get(b"Pages")?)?;
        let count = self.resolve(pages.as_dict()?.get(b"Count")?)?.as_int()?;
        u32::try_from(count).ok().filter(|&c| c >= 1)
    }

    fn producer(&mut self, trailer: &Dict) -> Option<String> {
        let info = self.resolve(trailer.get(b"Info")?)?;
        match self.resolve(info.as_dict()?.get(b"Producer")?)? {
            Object::Str(s) => Some(decode_text_string(&s)),
            _ => None,
        }
    }

    /// Counts `/Type /Page` dictionaries among all objects in the file.
    fn scan_page_objects(&mut self) -> Option<u32> {
        let offsets: Vec<(u32, usize)> = {
            let mut v: Vec<_> = self.scan_offsets().iter().map(|(&n, &o)| (n, o)).collect();
            v.sort_unstable();
            v
        };
        let mut count = 0u32;
        for (num, off) in offsets {
            let Some(obj) = self.object_at_offset(num, off) else { continue };
            match &obj {
                Object::Stream(d, raw) if d.is_type(b"ObjStm") => {
                    if let Some(os) = parse_object_stream(d, raw) {
                        for &(_, rel) in &os.entries {
                            let Some(at) = os.first.checked_add(rel) else { continue };
                            if let Some(Object::Dict(inner)) = Parser::new(&os.data, at).object(0) {
                                if inner.is_type(b"Page") {
                                    count = count.saturating_add(1);
                                }
                            }
                        }
                    }
                }
                _ => {
                    if obj.as_dict().is_some_and(|d| d.is_type(b"Page")) {
                        count = count.saturating_add(1);
                    }
                }
            }
        }
        (count > 0).then_some(count)
    }
}

fn parse_object_stream(dict: &Dict, raw: &[u8]) -> Option<ObjectStream> {
    if !dict.is_type(b"ObjStm") {
        return None;
    }
    let n = usize::try_from(dict.get(b"N")?.as_int()?).ok()?;
    let first = usize::try_from(dict.get(b"First")?.as_int()?).ok()?;
    let data = decode_stream(dict, raw)?;
    let mut p = Parser::new(&data, 0);
    let mut entries = Vec::with_capacity(n.min(4096));
    for _ in 0..n {
        let num = u32::try_from(p.integer()?).ok()?;
        let rel = usize::try_from(p.integer()?).ok()?;
        entries.push((num, rel));
    }
    Some(ObjectStream { data, first, entries })
}

/// Finds `N G obj` headers anywhere in the file.
fn scan_object_headers(bytes: &[u8]) -> Vec<(u32, usize)> {
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(at) = find(bytes, b"obj", from) {
        from = at + 3;
        if bytes.get(at + 3).is_some_and(|&b| is_regular(b)) {
            continue;
        }
        // Walk back over "<ws>gen<ws>num" before "obj".
        let mut i = at;
        let skip_ws_back = |i: &mut usize| {
            while *i > 0 && is_whitespace(bytes[*i - 1]) {
                *i -= 1;
            }
        };
        let digits_back = |i: &mut usize| -> Option<usize> {
            let end = *i;
            while *i > 0 && bytes[*i - 1].is_ascii_digit() {
                *i -= 1;
            }
            (end > *i && end - *i <= 10).then_some(*i)
        };
        skip_ws_back(&mut i);
        if i == at || digits_back(&mut i).is_none() {
            continue;
        }
        let gen_start = i;
        skip_ws_back(&mut i);
        if i == gen_start {
            continue;
        }
        let Some(num_start) = digits_back(&mut i) else { continue };
        if num_start > 0 && is_regular(bytes[num_start - 1]) {
            continue;
        }
        let num_end = bytes[num_start..].iter().position(|b| !b.is_ascii_digit()).map(|p| num_start + p);
        let Some(num_end) = num_end else { continue };
        let num = std::str::from_utf8(&bytes[num_start..num_end]).ok().and_then(|s| s.parse::<u32>().ok());
        if let Some(num) = num {
            out.push((num, num_start));
        }
    }
    out
}

fn decode_stream(dict: &Dict, raw: &[u8]) -> Option<Vec<u8>> {
    let filters: Vec<&[u8]> = match dict.get(b"Filter") {
        None => vec![],
        Some(Object::Name(n)) => vec![n.as_slice()],
        Some(Object::Array(a)) => a.iter().map(Object::as_name).collect::<Option<_>>()?,
        Some(_) => return None,
    };
    let params = match dict.get(b"DecodeParms") {
        Some(Object::Dict(d)) => Some(d),
        Some(Object::Array(a)) => a.first().and_then(Object::as_dict),
        _ => None,
    };
    let mut data = raw.to_vec();
    for f in filters {
        data = match f {
            b"FlateDecode" | b"Fl" => inflate(&data)?,
            _ => return None,
        };
    }
    if let Some(p) = params {
        let predictor = p.get(b"Predictor").and_then(Object::as_int).unwrap_or(1);
        if predictor >= 10 {
            let columns = p.get(b"Columns").and_then(Object::as_int).unwrap_or(1);
            let colors = p.get(b"Colors").and_then(Object::as_int).unwrap_or(1);
            let bpc = p.get(b"BitsPerComponent").and_then(Object::as_int).unwrap_or(8);
            let bpp = usize::try_from((colors * bpc + 7) / 8).ok()?.max(1);
            let row = usize::try_from(columns.checked_mul(colors)?.checked_mul(bpc)? / 8).ok()?;
            data = png_unpredict(&data, row, bpp)?;
        } else if predictor != 1 {
            return None;
        }
    }
    Some(data)
}

fn inflate(data: &[u8]) -> Option<Vec<u8>> {
    let mut out = Vec::new();
    let zlib = flate2::read::ZlibDecoder::new(data).take(MAX_DECODED_STREAM).read_to_end(&mut out);
    if zlib.is_ok() && !out.is_empty() {
        return Some(out);
    }
    // Tolerate truncated zlib streams as long as something decoded.
    if !out.is_empty() {
        return Some(out);
    }
    out.clear();
    flate2::read::DeflateDecoder::new(data).take(MAX_DECODED_STREAM).read_to_end(&mut out).ok()?;
    Some(out)
}

fn png_unpredict(data: &[u8], row: usize, bpp: usize) -> Option<Vec<u8>> {
    if row == 0 {
        return None;
    }
    let mut out = Vec::with_capacity(data.len());
    let mut prev = vec![0u8; row];
    for chunk in data.chunks(row + 1) {
        let (&tag, src) = chunk.split_first()?;
        let mut cur = vec![0u8; row];
        for i in 0..src.len().min(row) {
            let a = if i >= bpp { cur[i - bpp] } else { 0 };
            let b = prev[i];
            let c = if i >= bpp { prev[i - bpp] } else { 0 };
            let pred = match tag {
                0 => 0,
                1 => a,
                2 => b,
                3 => ((a as u16 + b as u16) / 2) as u8,
                4 => paeth(a, b, c),
                _ => return None,
            };
            cur[i] = src[i].wrapping_add(pred);
        }
        out.extend_from_slice(&cur[..src.len().min(row)]);
        prev = cur;
    }
    Some(out)
}

fn paeth(a: u8, b: u8, c: u8) -> u8 {
    let p = a as i16 + b as i16 - c as i16;
    let (pa, pb, pc) = ((p - a as i16).abs(), (p - b as i16).abs(), (p - c as i16).abs());
    if pa <= pb && pa <= pc {
        a
    } else if pb <= pc {
        b
    } else {
        c
    }
}

fn be_int(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0u64, |acc, &b| (acc << 8) | b as u64)
}

fn decode_text_string(s: &[u8]) -> String {
    if let Some(rest) = s.strip_prefix(&[0xFE, 0xFF]) {
        let units: Vec<u16> = rest.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
        String::from_utf16_lossy(&units)
    } else {
        // PDFDocEncoding agrees with Latin-1 on the printable range.
        s.iter().map(|&b| b as char).collect()
    }
}

fn is_whitespace(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\r' | b'\n' | b'\x0c' | b'\0')
}

fn is_delimiter(b: u8) -> bool {
    matches!(b, b'(' | b')' | b'<' | b'>' | b'[' | b']' | b'{' | b'}' | b'/' | b'%')
}

fn is_regular(b: u8) -> bool {
    !is_whitespace(b) && !is_delimiter(b)
}

fn find(hay: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    if from >= hay.len() || needle.is_empty() {
        return None;
    }
    hay[from..].windows(needle.len()).position(|w| w == needle).map(|p| p + from)
}

fn rfind(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).rposition(|w| w == needle)
}

/// Recursive-descent reader for PDF object syntax.
struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(bytes: &'a [u8], pos: usize) -> Self {
        Parser { bytes, pos: pos.min(bytes.len()) }
    }

    fn rest(&self) -> &'a [u8] {
        self.bytes.get(self.pos..).unwrap_or(&[])
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while let Some(b) = self.peek() {
            if is_whitespace(b) {
                self.pos += 1;
            } else if b == b'%' {
                while let Some(c) = self.peek() {
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn regular_token(&mut self) -> &'a [u8] {
        let start = self.pos;
        while self.peek().is_some_and(is_regular) {
            self.pos += 1;
        }
        self.bytes.get(start..self.pos).unwrap_or(&[])
    }

    fn integer(&mut self) -> Option<i64> {
        self.skip_ws();
        let tok = self.regular_token();
        std::str::from_utf8(tok).ok()?.parse().ok()
    }

    fn keyword(&mut self, kw: &[u8]) -> bool {
        self.skip_ws();
        let save = self.pos;
        if self.regular_token() == kw {
            true
        } else {
            self.pos = save;
            false
        }
    }

    /// Parses `N G obj <object> [stream ... endstream]`.
    fn indirect_object(&mut self) -> Option<(u32, u16, Object)> {
        let num = u32::try_from(self.integer()?).ok()?;
        let gen = u16::try_from(self.integer()?).ok()?;
        if !self.keyword(b"obj") {
            return None;
        }
        let obj = self.object(0)?;
        if let Object::Dict(dict) = obj {
            let save = self.pos;
            if self.keyword(b"stream") {
                let data = self.stream_body(&dict)?;
                return Some((num, gen, Object::Stream(dict, data)));
            }
            self.pos = save;
            return Some((num, gen, Object::Dict(dict)));
        }
        Some((num, gen, obj))
    }

    fn stream_body(&mut self, dict: &Dict) -> Option<Vec<u8>> {
        match self.peek() {
            Some(b'\r') => {
                self.pos += 1;
                if self.peek() == Some(b'\n') {
                    self.pos += 1;
                }
            }
            Some(b'\n') => self.pos += 1,
            _ => {}
        }
        let start = self.pos;
        let declared = dict.get(b"Length").and_then(Object::as_int).and_then(|l| usize::try_from(l).ok());
        if let Some(len) = declared {
            if let Some(end) = start.checked_add(len).filter(|&e| e <= self.bytes.len()) {
                let mut after = Parser::new(self.bytes, end);
                if after.keyword(b"endstream") {
                    self.pos = after.pos;
                    return Some(self.bytes[start..end].to_vec());
                }
            }
        }
        // Indirect or wrong /Length: fall back to the endstream marker.
        let end = find(self.bytes, b"endstream", start)?;
        let mut data_end = end;
        if data_end > start && self.bytes[data_end - 1] == b'\n' {
            data_end -= 1;
        }
        if data_end > start && self.bytes[data_end - 1] == b'\r' {
            data_end -= 1;
        }
        self.pos = end + b"endstream".len();
        Some(self.bytes[start..data_end].to_vec())
    }

    fn object(&mut self, depth: usize) -> Option<Object> {
        if depth > MAX_DEPTH {
            return None;
        }
        self.skip_ws();
        match self.peek()? {
            b'/' => {
                self.pos += 1;
                Some(Object::Name(decode_name(self.regular_token())))
            }
            b'(' => self.literal_string().map(Object::Str),
            b'<' => {
                if self.bytes.get(self.pos + 1) == Some(&b'<') {
                    self.pos += 2;
                    self.dict(depth).map(Object::Dict)
                } else {
                    self.hex_string().map(Object::Str)
                }
            }
            b'[' => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.peek()? {
                        b']' => {
                            self.pos += 1;
                            return Some(Object::Array(items));
                        }
                        _ => items.push(self.object(depth + 1)?),
                    }
                }
            }
            b if is_regular(b) => {
                let tok = self.regular_token();
                match tok {
                    b"true" => Some(Object::Bool(true)),
                    b"false" => Some(Object::Bool(false)),
                    b"null" => Some(Object::Null),
                    _ => self.number_or_ref(tok),
                }
            }
            _ => None,
        }
    }

    fn number_or_ref(&mut self, tok: &[u8]) -> Option<Object> {
        let s = std::str::from_utf8(tok).ok()?;
        if let Ok(i) = s.parse::<i64>() {
            let save = self.pos;
            if let Some(gen) = self.integer() {
                if self.keyword(b"R") {
                    if let (Ok(num), Ok(gen)) = (u32::try_from(i), u16::try_from(gen)) {
                        return Some(Object::Ref(num, gen));
                    }
                }
            }
            self.pos = save;
            return Some(Object::Int(i));
        }
        s.parse::<f64>().ok().filter(|v| v.is_finite()).map(Object::Real)
    }

    fn dict(&mut self, depth: usize) -> Option<Dict> {
        let mut entries = Vec::new();
        loop {
            self.skip_ws();
            match self.peek()? {
                b'>' => {
                    if self.bytes.get(self.pos + 1) == Some(&b'>') {
                        self.pos += 2;
                        return Some(Dict(entries));
                    }
                    return None;
                }
                b'/' => {
                    self.pos += 1;
                    let key = decode_name(self.regular_token());
                    let value = self.object(depth + 1)?;
                    entries.push((key, value));
                }
                _ => return None,
            }
        }
    }

    fn literal_string(&mut self) -> Option<Vec<u8>> {
        self.pos += 1;
        let mut out = Vec::new();
        let mut nesting = 1usize;
        loop {
            let b = self.peek()?;
            self.pos += 1;
            match b {
                b'(' => {
                    nesting += 1;
                    out.push(b);
                }
                b')' => {
                    nesting -= 1;
                    if nesting == 0 {
                        return Some(out);
                    }
                    out.push(b);
                }
                b'\\' => {
                    let e = self.peek()?;
                    self.pos += 1;
                    match e {
                        b'n' => out.push(b'\n'),
                        b'r' => out.push(b'\r'),
                        b't' => out.push(b'\t'),
                        b'b' => out.push(0x08),
                        b'f' => out.push(0x0c),
                        b'\r' => {
                            if self.peek() == Some(b'\n') {
                                self.pos += 1;
                            }
                        }
                        b'\n' => {}
                        b'0'..=b'7' => {
                            let mut v = (e - b'0') as u32;
                            for _ in 0..2 {
                                match self.peek() {
                                    Some(d @ b'0'..=b'7') => {
                                        v = v * 8 + (d - b'0') as u32;
                                        self.pos += 1;
                                    }
                                    _ => break,
                                }
                            }
                            out.push(v as u8);
                        }
                        other => out.push(other),
                    }
                }
                _ => out.push(b),
            }
        }
    }

    fn hex_string(&mut self) -> Option<Vec<u8>> {
        self.pos += 1;
        let mut nibbles = Vec::new();
        loop {
            let b = self.peek()?;
            self.pos += 1;
            match b {
                b'>' => break,
                b if is_whitespace(b) => {}
                b => nibbles.push(hex_val(b)?),
            }
        }
        if nibbles.len() % 2 == 1 {
            nibbles.push(0);
        }
        Some(nibbles.chunks(2).map(|c| (c[0] << 4) | c[1]).collect())
    }
}

fn hex_val(b: u8) -> Option<u8> {
    match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'a'..=b'f' => Some(b - b'a' + 10),
        b'A'..=b'F' => Some(b - b'A' + 10),
        _ => None,
    }
}

fn decode_name(raw: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        if raw[i] == b'#' && i + 2 < raw.len() {
            if let (Some(h), Some(l)) = (hex_val(raw[i + 1]), hex_val(raw[i + 2])) {
                out.push((h << 4) | l);
                i += 3;
                continue;
            }
        }
        out.push(raw[i]);
        i += 1;
    }
    out
}
