#pragma once

namespace stego {

// Composite loss coefficients: perceptual, image MSE, LSE, message MSE.
struct LossWeights {
    double alpha1 = 1.0;
    double alpha2 = 1.5;
    double alpha3 = 0.1;
    double alpha4 = 16.0;
};

}  // namespace stego
