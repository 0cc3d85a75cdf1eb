/** Closed-form expert actions recomputed on the trainer side from the
 * observed effective channels. Needs full observability (I_card = K) and
 * the scenario's noise power. */

import { CMat, add, cholLower, cmat, ctrans, eye, hermitize, matmul, scaleAdd, solveHpd, sub } from "./complex.js";
import { ActPayload } from "./codec.js";

export function obsToMatrices(xi: number[][], iCard: number, nr: number, ns: number): CMat[] {
  const out: CMat[] = [];
  let pos = 0;
  for (let i = 0; i < iCard; i++) {
    const m = cmat(nr, ns);
    for (let idx = 0; idx < nr * ns; idx++) {
      m.re[idx] = xi[pos][0];
      m.im[idx] = xi[pos][1];
      pos += 1;
    }
    out.push(m);
  }
  return out;
}

/** Member order on the wire: the agent's own index first, then the rest
 * of its similarity set ascending. With I_card = K that is [k, others]. */
export function memberOrder(k: number, K: number): number[] {
  const others = [];
  for (let i = 0; i < K; i++) if (i !== k) others.push(i);
  return [k, ...others];
}

export function expertAction(
  k: number,
  xiPairs: number[][],
  K: number,
  nr: number,
  ns: number,
  noisePower: number,
): ActPayload {
  const mats = obsToMatrices(xiPairs, K, nr, ns);
  const members = memberOrder(k, K);
  const byUser: CMat[] = new Array(K);
  members.forEach((i, idx) => {
    byUser[i] = mats[idx];
  });

  // J = sum_i Xi_ki Xi_ki^H + sigma^2 I
  let j = cmat(nr, nr);
  for (let i = 0; i < K; i++) {
    j = add(j, matmul(byUser[i], ctrans(byUser[i])));
  }
  j = scaleAdd(j, noisePower);
  const u = solveHpd(hermitize(j), byUser[k]);

  // E = (I - U^H Xi_kk)(...)^H + sum_{i!=k} (U^H Xi_ki)(...)^H + sigma^2 U^H U
  const uh = ctrans(u);
  const m = sub(eye(ns), matmul(uh, byUser[k]));
  let e = matmul(m, ctrans(m));
  for (let i = 0; i < K; i++) {
    if (i === k) continue;
    const t = matmul(uh, byUser[i]);
    e = add(e, matmul(t, ctrans(t)));
  }
  const uu = matmul(uh, u);
  for (let idx = 0; idx < ns * ns; idx++) {
    e.re[idx] += noisePower * uu.re[idx];
    e.im[idx] += noisePower * uu.im[idx];
  }
  const w = hermitize(solveHpd(hermitize(e), eye(ns)));
  const lMat = cholLower(w);

  const tril: number[] = [];
  for (let i = 0; i < ns; i++) tril.push(lMat.re[i * ns + i]);
  for (let r = 1; r < ns; r++) {
    for (let c = 0; c < r; c++) {
      tril.push(lMat.re[r * ns + c]);
      tril.push(lMat.im[r * ns + c]);
    }
  }
  const uPairs: number[][] = [];
  for (let idx = 0; idx < nr * ns; idx++) uPairs.push([u.re[idx], u.im[idx]]);
  return { k, tril_L: tril, U: uPairs };
}
