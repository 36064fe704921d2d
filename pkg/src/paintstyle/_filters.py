"""Filter constants for the dual-tree complex wavelet transform.

Level 1 uses Kingsbury's near-symmetric 13,19-tap biorthogonal pair
("near_sym_b"); levels 2 and up use the 14-tap quarter-shift orthogonal pair
("qshift_b"). Values as published with N. Kingsbury's DTCWT MATLAB toolbox
(Cambridge, 2000). The second tree's Q-shift filters are time reverses of the
first tree's, and synthesis filters are time reverses of analysis filters.
"""
import numpy as np

# near_sym_b, analysis
H0O = np.array([
    -0.0017578125, 0.0, 0.022265625, -0.046875, -0.0482421875, 0.296875,
    0.55546875,
    0.296875, -0.0482421875, -0.046875, 0.022265625, 0.0, -0.0017578125,
])
H1O = np.array([
    -7.062639508928571e-05, 0.0, 0.0013419015066964285, -0.0018833705357142855,
    -0.007156808035714285, 0.023856026785714284, 0.05564313616071428,
    -0.05168805803571428, -0.29975760323660716,
    0.5594308035714286,
    -0.29975760323660716, -0.05168805803571428, 0.05564313616071428,
    0.023856026785714284, -0.007156808035714285, -0.0018833705357142855,
    0.0013419015066964285, 0.0, -7.062639508928571e-05,
])

# near_sym_b, synthesis
G0O = np.array([
    7.062639508928571e-05, 0.0, -0.0013419015066964285, -0.0018833705357142855,
    0.007156808035714285, 0.023856026785714284, -0.05564313616071428,
    -0.05168805803571428, 0.29975760323660716,
    0.5594308035714286,
    0.29975760323660716, -0.05168805803571428, -0.05564313616071428,
    0.023856026785714284, 0.007156808035714285, -0.0018833705357142855,
    -0.0013419015066964285, 0.0, 7.062639508928571e-05,
])
G1O = np.array([
    -0.0017578125, 0.0, 0.022265625, 0.046875, -0.0482421875, -0.296875,
    0.55546875,
    -0.296875, -0.0482421875, 0.046875, 0.022265625, 0.0, -0.0017578125,
])

# qshift_b, tree a analysis
H0A = np.array([
    0.003253142763653182, -0.00388321199915849, 0.03466034684485349,
    -0.03887280126882779, -0.11720388769911527, 0.27529538466888204,
    0.7561456438925225, 0.5688104207121227, 0.011866092033797,
    -0.1067118046866654, 0.023825384794920298, 0.01702522388155399,
    -0.005439475937274115, -0.004556895628475491,
])
H1A = np.array([
    -0.004556895628475491, 0.005439475937274115, 0.01702522388155399,
    -0.023825384794920298, -0.1067118046866654, -0.011866092033797,
    0.5688104207121227, -0.7561456438925225, 0.27529538466888204,
    0.11720388769911527, -0.03887280126882779, -0.03466034684485349,
    -0.00388321199915849, -0.003253142763653182,
])
H0B = H0A[::-1].copy()
H1B = H1A[::-1].copy()
G0A, G0B = H0B, H0A
G1A, G1B = H1B, H1A

for _f in (H0O, H1O, G0O, G1O, H0A, H1A, H0B, H1B):
    _f.setflags(write=False)

# Daubechies length-8 orthonormal lowpass, used only by the critically
# sampled baseline transform
DB4 = np.array([
    0.2303778133088964, 0.7148465705529154, 0.6308807679298587,
    -0.0279837694168599, -0.1870348117190931, 0.0308413818355607,
    0.0328830116668852, -0.0105974017850690,
])
DB4.setflags(write=False)
