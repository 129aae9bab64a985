"""Reflectance reduction at 460 nm across the phantom concentration series."""
import numpy as np

from speccam.phantom import PHANTOM_SERIES_MG_DL, CameraModel, PhantomSpec, phantom_calibration, phantom_reflectance, render_rgb
from speccam.reconstruction import reconstruct_pixel, reflectance_reduction


def main():
    camera = CameraModel(noise_sigma=0.0)
    tm = phantom_calibration(camera)
    spectra = [
        reconstruct_pixel(tm, render_rgb(camera, phantom_reflectance(PhantomSpec(bilirubin_mg_dl=c))))
        for c in PHANTOM_SERIES_MG_DL
    ]
    c = np.array(PHANTOM_SERIES_MG_DL)
    red = np.array([reflectance_reduction(s, spectra[0]) for s in spectra])
    for ci, ri in zip(c, red):
        print(f"{ci:6.2f} mg/dL  reduction {ri:.4f}")
    r = np.corrcoef(c, red)[0, 1]
    print(f"R^2 {r * r:.4f}")


if __name__ == "__main__":
    main()
