//! Versioned little-endian parameter blob: magic `MFNN`, version `u32`,
//! layer-size count `u32`, sizes `u32`, then per layer the row-major
//! weight matrix followed by the bias vector as `f64`.

use super::{AgentError, Mlp};

const MAGIC: &[u8; 4] = b"MFNN";
const VERSION: u32 = 1;

pub fn encode_mlp(net: &Mlp, out: &mut Vec<u8>) {
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.sizes().len() as u32).to_le_bytes());
    for s in net.sizes() {
        out.extend_from_slice(&(*s as u32).to_le_bytes());
    }
    for l in net.layers() {
        for v in l.weights.iter().chain(&l.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub(crate) struct BlobReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> BlobReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        BlobReader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], AgentError> {
        if self.pos + n > self.buf.len() {
            return Err(AgentError::BadBlob("truncated parameter blob".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32, AgentError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn f64(&mut self) -> Result<f64, AgentError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn is_empty(&self) -> bool {
        self.pos == self.buf.len()
    }

    /// Reads one network record into `net`, whose layer sizes must match.
    pub fn read_mlp_into(&mut self, net: &mut Mlp) -> Result<(), AgentError> {
        if self.take(4)? != MAGIC {
            return Err(AgentError::BadBlob("bad magic".into()));
        }
        let version = self.u32()?;
        if version != VERSION {
            return Err(AgentError::BadBlob(format!("unsupported version {version}")));
        }
        let count = self.u32()? as usize;
        let sizes = (0..count).map(|_| self.u32().map(|s| s as usize)).collect::<Result<Vec<_>, _>>()?;
        if sizes != net.sizes() {
            return Err(AgentError::BadBlob(format!("layer sizes {sizes:?} do not match {:?}", net.sizes())));
        }
        let params = (0..net.n_params()).map(|_| self.f64()).collect::<Result<Vec<_>, _>>()?;
        net.set_params(&params)
    }
}

pub fn decode_mlp_into(blob: &[u8], net: &mut Mlp) -> Result<(), AgentError> {
    let mut r = BlobReader::new(blob);
    r.read_mlp_into(net)?;
    if !r.is_empty() {
        return Err(AgentError::BadBlob("trailing bytes after network".into()));
    }
    Ok(())
}
