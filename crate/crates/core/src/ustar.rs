//! Minimal deterministic POSIX ustar read/write.
//!
//! Both archive layers use this: the outer provenance envelope directly, and
//! the inner source archive before gzip. Keeping the tar writer in-tree is
//! what makes packing a pure function: fixed header fields (mtime 0, uid/gid
//! 0, mode 0644, no user names), ASCII names of at most 100 bytes, regular
//! files only. The reader is strict: header checksums must hold, only
//! end-of-archive zero padding is tolerated, and anything else is a format
//! error.

use thiserror::Error;

/// Maximum entry name length (the ustar `name` field; the `prefix` field is
/// intentionally unused).
pub const NAME_MAX: usize = 100;

const BLOCK: usize = 512;

#[derive(Debug, Error)]
pub enum UstarError {
    #[error("entry name {0:?} is longer than {NAME_MAX} bytes")]
    NameTooLong(String),
    #[error("entry name {0:?} is not printable ASCII")]
    NameNotAscii(String),
    #[error("archive truncated")]
    Truncated,
    #[error("header checksum mismatch at offset {0}")]
    BadChecksum(usize),
    #[error("bad header field at offset {offset}: {reason}")]
    BadHeader { offset: usize, reason: String },
    #[error("unsupported entry type {0:?} (regular files only)")]
    UnsupportedType(char),
    #[error("garbage after end-of-archive marker")]
    TrailingGarbage,
}

/// Serialize entries in the given order. Identical input yields identical
/// bytes.
pub fn write_archive(entries: &[(&str, &[u8])]) -> Result<Vec<u8>, UstarError> {
    let mut out = Vec::with_capacity(entries.len() * 2 * BLOCK);
    for (name, data) in entries {
        out.extend_from_slice(&header_for(name, data.len())?);
        out.extend_from_slice(data);
        let pad = (BLOCK - data.len() % BLOCK) % BLOCK;
        out.extend_from_slice(&vec![0u8; pad]);
    }
    // End-of-archive marker: two zero blocks.
    out.extend_from_slice(&[0u8; 2 * BLOCK]);
    Ok(out)
}

fn header_for(name: &str, size: usize) -> Result<[u8; BLOCK], UstarError> {
    if name.len() > NAME_MAX {
        return Err(UstarError::NameTooLong(name.to_owned()));
    }
    if !name.bytes().all(|b| (0x20..0x7f).contains(&b)) {
        return Err(UstarError::NameNotAscii(name.to_owned()));
    }
    let mut header = [0u8; BLOCK];
    header[..name.len()].copy_from_slice(name.as_bytes());
    write_octal(&mut header[100..108], 0o644); // mode
    write_octal(&mut header[108..116], 0); // uid
    write_octal(&mut header[116..124], 0); // gid
    write_octal(&mut header[124..136], size as u64); // size
    write_octal(&mut header[136..148], 0); // mtime
    header[156] = b'0'; // typeflag: regular file
    header[257..263].copy_from_slice(b"ustar\0");
    header[263..265].copy_from_slice(b"00");
    // uname, gname, devmajor, devminor, prefix stay zeroed.

    let checksum: u64 = header
        .iter()
        .enumerate()
        .map(|(i, b)| if (148..156).contains(&i) { 0x20u64 } else { *b as u64 })
        .sum();
    let chk = format!("{checksum:06o}\0 ");
    header[148..156].copy_from_slice(chk.as_bytes());
    Ok(header)
}

fn write_octal(field: &mut [u8], value: u64) {
    // Octal digits padded with leading zeros, NUL terminated.
    let digits = field.len() - 1;
    let s = format!("{value:0digits$o}");
    field[..digits].copy_from_slice(s.as_bytes());
    field[digits] = 0;
}

/// Parse an archive into `(name, data)` pairs in storage order.
pub fn read_archive(bytes: &[u8]) -> Result<Vec<(String, Vec<u8>)>, UstarError> {
    let mut entries = Vec::new();
    let mut offset = 0usize;
    loop {
        let header = bytes
            .get(offset..offset + BLOCK)
            .ok_or(UstarError::Truncated)?;
        if header.iter().all(|&b| b == 0) {
            // End marker: the rest of the archive must be zero padding.
            if bytes[offset..].iter().any(|&b| b != 0) {
                return Err(UstarError::TrailingGarbage);
            }
            if bytes.len() - offset < 2 * BLOCK {
                return Err(UstarError::Truncated);
            }
            return Ok(entries);
        }

        verify_checksum(header, offset)?;
        if &header[257..263] != b"ustar\0" {
            return Err(UstarError::BadHeader {
                offset,
                reason: "missing ustar magic".into(),
            });
        }
        if header[345..500].iter().any(|&b| b != 0) {
            return Err(UstarError::BadHeader {
                offset,
                reason: "prefix field in use".into(),
            });
        }
        let typeflag = header[156];
        if typeflag != b'0' && typeflag != 0 {
            return Err(UstarError::UnsupportedType(typeflag as char));
        }
        let name_bytes: Vec<u8> = header[..NAME_MAX]
            .iter()
            .copied()
            .take_while(|&b| b != 0)
            .collect();
        let name = String::from_utf8(name_bytes).map_err(|_| UstarError::BadHeader {
            offset,
            reason: "name not UTF-8".into(),
        })?;
        if name.is_empty() {
            return Err(UstarError::BadHeader {
                offset,
                reason: "empty name".into(),
            });
        }
        let size = parse_octal(&header[124..136]).ok_or_else(|| UstarError::BadHeader {
            offset,
            reason: "bad size field".into(),
        })? as usize;

        let data_start = offset + BLOCK;
        let data = bytes
            .get(data_start..data_start + size)
            .ok_or(UstarError::Truncated)?
            .to_vec();
        entries.push((name, data));
        let padded = size.div_ceil(BLOCK) * BLOCK;
        offset = data_start + padded;
    }
}

fn verify_checksum(header: &[u8], offset: usize) -> Result<(), UstarError> {
    let stored = parse_octal(&header[148..156]).ok_or(UstarError::BadChecksum(offset))?;
    let actual: u64 = header
        .iter()
        .enumerate()
        .map(|(i, b)| if (148..156).contains(&i) { 0x20u64 } else { *b as u64 })
        .sum();
    if stored != actual {
        return Err(UstarError::BadChecksum(offset));
    }
    Ok(())
}

fn parse_octal(field: &[u8]) -> Option<u64> {
    let digits: Vec<u8> = field
        .iter()
        .copied()
        .skip_while(|&b| b == b' ')
        .take_while(|&b| b != 0 && b != b' ')
        .collect();
    if digits.is_empty() {
        return Some(0);
    }
    let mut value: u64 = 0;
    for b in digits {
        if !(b'0'..=b'7').contains(&b) {
            return None;
        }
        value = value.checked_mul(8)?.checked_add((b - b'0') as u64)?;
    }
    Some(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_names_order_and_bytes() {
        let entries: Vec<(&str, &[u8])> = vec![
            ("b.json", b"{\"k\":1}".as_slice()),
            ("a.json", b"second".as_slice()),
            ("dir/nested.txt", b"".as_slice()),
        ];
        let bytes = write_archive(&entries).unwrap();
        assert_eq!(bytes.len() % BLOCK, 0);
        let read = read_archive(&bytes).unwrap();
        assert_eq!(read.len(), 3);
        for ((name, data), (rname, rdata)) in entries.iter().zip(&read) {
            assert_eq!(name, rname);
            assert_eq!(data, &rdata.as_slice());
        }
    }

    #[test]
    fn writing_is_deterministic() {
        let entries: Vec<(&str, &[u8])> = vec![("x", b"payload".as_slice())];
        assert_eq!(write_archive(&entries).unwrap(), write_archive(&entries).unwrap());
    }

    #[test]
    fn long_and_non_ascii_names_rejected() {
        let long = "a".repeat(101);
        assert!(matches!(
            write_archive(&[(long.as_str(), b"".as_slice())]),
            Err(UstarError::NameTooLong(_))
        ));
        assert!(matches!(
            write_archive(&[("caf\u{e9}", b"".as_slice())]),
            Err(UstarError::NameNotAscii(_))
        ));
    }

    #[test]
    fn corrupted_header_fails_checksum() {
        let bytes = write_archive(&[("f", b"data".as_slice())]).unwrap();
        let mut bad = bytes.clone();
        bad[0] ^= 0xff;
        assert!(matches!(read_archive(&bad), Err(UstarError::BadChecksum(0))));
    }

    #[test]
    fn inter_entry_garbage_is_rejected() {
        let a = write_archive(&[("a", b"1".as_slice())]).unwrap();
        // Splice garbage between the first entry and the end marker.
        let mut spliced = a[..2 * BLOCK].to_vec();
        spliced.extend_from_slice(&[0xAAu8; BLOCK]);
        spliced.extend_from_slice(&[0u8; 2 * BLOCK]);
        assert!(read_archive(&spliced).is_err());
    }

    #[test]
    fn trailing_zero_padding_is_accepted_but_garbage_is_not() {
        let mut bytes = write_archive(&[("a", b"1".as_slice())]).unwrap();
        bytes.extend_from_slice(&[0u8; 6 * BLOCK]); // blocking-factor padding
        assert_eq!(read_archive(&bytes).unwrap().len(), 1);

        let mut garbage = bytes.clone();
        let last = garbage.len() - 1;
        garbage[last] = 1;
        assert!(matches!(read_archive(&garbage), Err(UstarError::TrailingGarbage)));
    }

    #[test]
    fn truncated_archive_is_rejected() {
        let bytes = write_archive(&[("a", b"1234".as_slice())]).unwrap();
        assert!(matches!(
            read_archive(&bytes[..BLOCK + 2]),
            Err(UstarError::Truncated)
        ));
        // Missing the second end-marker block.
        assert!(matches!(
            read_archive(&bytes[..bytes.len() - BLOCK]),
            Err(UstarError::Truncated)
        ));
    }

    #[test]
    fn directory_entries_are_rejected() {
        let mut bytes = write_archive(&[("d", b"".as_slice())]).unwrap();
        bytes[156] = b'5'; // directory typeflag
        // Fix the checksum for the altered byte.
        let mut header = [0u8; BLOCK];
        header.copy_from_slice(&bytes[..BLOCK]);
        let checksum: u64 = header
            .iter()
            .enumerate()
            .map(|(i, b)| if (148..156).contains(&i) { 0x20u64 } else { *b as u64 })
            .sum();
        bytes[148..156].copy_from_slice(format!("{checksum:06o}\0 ").as_bytes());
        assert!(matches!(
            read_archive(&bytes),
            Err(UstarError::UnsupportedType('5'))
        ));
    }
}
