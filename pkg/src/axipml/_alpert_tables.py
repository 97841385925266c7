"""Endpoint-correction tables for the hybrid Gauss-trapezoidal rules.

Generated by tools/gen_alpert_tables.py from the Hurwitz-zeta moment
conditions (see axipml.quadrature); node/weight values stored as exact
hex float literals.  Each entry: (skip_index, nodes, weights).
"""



def _h(s):
    return float.fromhex(s)


REG_RULES = {
    2: (1,
        [_h('0x1.5555555555555p-3')],
        [_h('0x1.0000000000000p-1')]),
    6: (3,
        [_h('0x1.be93217cf0110p-3'), _h('0x1.004d748a0460ap+0'), _h('0x1.ff616ff81787cp+0')],
        [_h('0x1.14e4e7599a806p-1'), _h('0x1.e7402d3e16356p-1'), _h('0x1.01ed75b427a52p+0')]),
    10: (5,
        [_h('0x1.66ffcc14587d7p-3'), _h('0x1.ba302b382ae53p-1'), _h('0x1.e201c76ea5ebbp+0'), _h('0x1.7c44b329d4d68p+1'), _h('0x1.ffd410b8b0585p+1')],
        [_h('0x1.c56b0d3b926efp-2'), _h('0x1.cbd2af1d30966p-1'), _h('0x1.17c74ade9dde6p+0'), _h('0x1.0f70ddbc9b20cp+0'), _h('0x1.0183bc874a1a0p+0')]),
}

LOG_RULES = {
    2: (2,
        [_h('0x1.d733be6fce508p-4'), _h('0x1.df830443e0db8p-1')],
        [_h('0x1.90babeefe33f3p-2'), _h('0x1.1bd1504407303p+0')]),
    6: (6,
        [_h('0x1.fb61d86c85fd3p-7'), _h('0x1.ad854fc912eeap-3'), _h('0x1.bfe090b52ccdfp-1'), _h('0x1.0f1013119d57fp+1'), _h('0x1.d2fe8b2ef94b3p+1'), _h('0x1.3db8238b6d7f8p+2')],
        [_h('0x1.dbdf5bad9eaaap-5'), _h('0x1.8a5e57d367cc6p-2'), _h('0x1.ef174f759682fp-1'), _h('0x1.77d4ca688d975p+0'), _h('0x1.7ee74d8065476p+0'), _h('0x1.2041af89faf78p+0')]),
    10: (10,
        [_h('0x1.0498bee0f75e2p-8'), _h('0x1.42bcaf2f11e36p-7'), _h('0x1.8d9707d3663c8p-6'), _h('0x1.ed40629d895f9p-5'), _h('0x1.2d0b53fba80f0p-3'), _h('0x1.855f340ad839ap-2'), _h('0x1.c57b2524482bfp-1'), _h('0x1.4a223ad17d7b4p+0'), _h('0x1.fcbf41720ebadp+0'), _h('0x1.b605da5b112a4p+1'), _h('0x1.05c138e319067p+2'), _h('0x1.36a1f1441e9b2p+2'), _h('0x1.5f6564154e86cp+2'), _h('0x1.94cf0a40e38cdp+2'), _h('0x1.f3acba78d961ep+2'), _h('0x1.f761ffc53a32ep+2'), _h('0x1.1fc41b563c670p+3')],
        [_h('0x1.3ab0413b5bc12p-6'), _h('-0x1.3c9c8334c72cdp-6'), _h('0x1.6d2b133104f37p-5'), _h('0x1.6fa01b3da0883p-5'), _h('0x1.1780369d87853p-3'), _h('0x1.6fb588c1dcf28p-2'), _h('0x1.398f106746b4bp-1'), _h('0x1.17a6828ec782dp-2'), _h('0x1.218db0aef38d1p+0'), _h('0x1.eff17596fd6d0p+0'), _h('-0x1.e2c6a069df7a9p-1'), _h('0x1.4ec42b723ecfbp+1'), _h('-0x1.de4d476b7f3d1p-1'), _h('0x1.e57a9981c3098p+0'), _h('0x1.fbe90cbd9a41dp-3'), _h('0x1.0c0b192b31dd8p+0'), _h('0x1.081268348bacap+0')]),
}
