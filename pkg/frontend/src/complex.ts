/** Small dense complex-matrix routines for the expert loopback client.
 * Matrices are row-major {re, im} Float64Array pairs. */

export interface CMat {
  rows: number;
  cols: number;
  re: Float64Array;
  im: Float64Array;
}

export function cmat(rows: number, cols: number): CMat {
  return { rows, cols, re: new Float64Array(rows * cols), im: new Float64Array(rows * cols) };
}

export function eye(n: number): CMat {
  const out = cmat(n, n);
  for (let i = 0; i < n; i++) out.re[i * n + i] = 1;
  return out;
}

export function clone(a: CMat): CMat {
  return { rows: a.rows, cols: a.cols, re: a.re.slice(), im: a.im.slice() };
}

/** c = a @ b */
export function matmul(a: CMat, b: CMat): CMat {
  if (a.cols !== b.rows) throw new Error(`matmul shape ${a.rows}x${a.cols} @ ${b.rows}x${b.cols}`);
  const out = cmat(a.rows, b.cols);
  for (let i = 0; i < a.rows; i++) {
    for (let j = 0; j < b.cols; j++) {
      let sr = 0;
      let si = 0;
      for (let k = 0; k < a.cols; k++) {
        const ar = a.re[i * a.cols + k];
        const ai = a.im[i * a.cols + k];
        const br = b.re[k * b.cols + j];
        const bi = b.im[k * b.cols + j];
        sr += ar * br - ai * bi;
        si += ar * bi + ai * br;
      }
      out.re[i * b.cols + j] = sr;
      out.im[i * b.cols + j] = si;
    }
  }
  return out;
}

/** conjugate transpose */
export function ctrans(a: CMat): CMat {
  const out = cmat(a.cols, a.rows);
  for (let i = 0; i < a.rows; i++) {
    for (let j = 0; j < a.cols; j++) {
      out.re[j * a.rows + i] = a.re[i * a.cols + j];
      out.im[j * a.rows + i] = -a.im[i * a.cols + j];
    }
  }
  return out;
}

export function add(a: CMat, b: CMat): CMat {
  const out = clone(a);
  for (let i = 0; i < a.re.length; i++) {
    out.re[i] += b.re[i];
    out.im[i] += b.im[i];
  }
  return out;
}

export function sub(a: CMat, b: CMat): CMat {
  const out = clone(a);
  for (let i = 0; i < a.re.length; i++) {
    out.re[i] -= b.re[i];
    out.im[i] -= b.im[i];
  }
  return out;
}

export function scaleAdd(a: CMat, s: number): CMat {
  // a + s*I
  const out = clone(a);
  for (let i = 0; i < a.rows; i++) out.re[i * a.cols + i] += s;
  return out;
}

/** Lower Cholesky factor of a Hermitian PD matrix. */
export function cholLower(a: CMat): CMat {
  const n = a.rows;
  const l = cmat(n, n);
  for (let j = 0; j < n; j++) {
    let d = a.re[j * n + j];
    for (let k = 0; k < j; k++) {
      d -= l.re[j * n + k] * l.re[j * n + k] + l.im[j * n + k] * l.im[j * n + k];
    }
    if (!(d > 0)) throw new Error(`cholesky pivot ${d} at ${j}`);
    const ljj = Math.sqrt(d);
    l.re[j * n + j] = ljj;
    for (let i = j + 1; i < n; i++) {
      let sr = a.re[i * n + j];
      let si = a.im[i * n + j];
      for (let k = 0; k < j; k++) {
        sr -= l.re[i * n + k] * l.re[j * n + k] + l.im[i * n + k] * l.im[j * n + k];
        si -= l.im[i * n + k] * l.re[j * n + k] - l.re[i * n + k] * l.im[j * n + k];
      }
      l.re[i * n + j] = sr / ljj;
      l.im[i * n + j] = si / ljj;
    }
  }
  return l;
}

/** Solve a x = b for Hermitian PD a via Cholesky. */
export function solveHpd(a: CMat, b: CMat): CMat {
  const n = a.rows;
  const m = b.cols;
  const l = cholLower(a);
  const x = clone(b);
  for (let col = 0; col < m; col++) {
    for (let i = 0; i < n; i++) {
      let sr = x.re[i * m + col];
      let si = x.im[i * m + col];
      for (let k = 0; k < i; k++) {
        sr -= l.re[i * n + k] * x.re[k * m + col] - l.im[i * n + k] * x.im[k * m + col];
        si -= l.re[i * n + k] * x.im[k * m + col] + l.im[i * n + k] * x.re[k * m + col];
      }
      x.re[i * m + col] = sr / l.re[i * n + i];
      x.im[i * m + col] = si / l.re[i * n + i];
    }
    for (let i = n - 1; i >= 0; i--) {
      let sr = x.re[i * m + col];
      let si = x.im[i * m + col];
      for (let k = i + 1; k < n; k++) {
        sr -= l.re[k * n + i] * x.re[k * m + col] + l.im[k * n + i] * x.im[k * m + col];
        si -= l.re[k * n + i] * x.im[k * m + col] - l.im[k * n + i] * x.re[k * m + col];
      }
      x.re[i * m + col] = sr / l.re[i * n + i];
      x.im[i * m + col] = si / l.re[i * n + i];
    }
  }
  return x;
}

export function hermitize(a: CMat): CMat {
  const out = clone(a);
  const n = a.rows;
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      out.re[i * n + j] = 0.5 * (a.re[i * n + j] + a.re[j * n + i]);
      out.im[i * n + j] = 0.5 * (a.im[i * n + j] - a.im[j * n + i]);
    }
  }
  return out;
}
