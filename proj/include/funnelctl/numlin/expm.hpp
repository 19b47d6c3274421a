#pragma once

#include <cmath>

#include "funnelctl/core.hpp"

namespace funnelctl::numlin {

/// Matrix exponential e^{m*t} by scaling-and-squaring with the diagonal
/// Pade [13/13] approximant. expm(m, 0) returns the identity exactly.
inline Matrix expm(const Matrix& m, double t = 1.0) {
    if (m.rows() != m.cols()) throw NumericalError("expm: matrix must be square");
    const Index n = m.rows();
    if (n == 0) return Matrix(0, 0);
    Matrix a = m * t;
    double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    if (norm1 == 0.0) return Matrix::Identity(n, n);

    static const double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                               1187353796428800.0,  129060195264000.0,   10559470521600.0,
                               670442572800.0,      33522128640.0,       1323241920.0,
                               40840800.0,          960960.0,            16380.0,
                               182.0,               1.0};
    const double theta13 = 5.371920351148152;

    int squarings = 0;
    if (norm1 > theta13) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
        a /= std::pow(2.0, squarings);
    }

    const Matrix a2 = a * a;
    const Matrix a4 = a2 * a2;
    const Matrix a6 = a2 * a4;
    const Matrix eye = Matrix::Identity(n, n);

    Matrix u = a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
                    b[3] * a2 + b[1] * eye);
    Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 +
               b[0] * eye;

    Matrix r = (v - u).partialPivLu().solve(v + u);
    for (int i = 0; i < squarings; ++i) r = r * r;
    return r;
}

}  // namespace funnelctl::numlin
