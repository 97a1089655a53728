#include "amplasso/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <vector>

namespace amplasso {

namespace {

// Kronrod 15-point abscissae (positive half) and weights, with the embedded
// Gauss 7-point weights (abscissae at odd indices).
constexpr std::array<double, 8> kXk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
    double a;
    double b;
    double value;
    double error;
    bool operator<(const Panel& other) const { return error < other.error; }
};

double checked(const std::function<double(double)>& f, double x)
{
    const double y = f(x);
    if (!std::isfinite(y))
        throw QuadratureError("integrand is not finite at x = " + std::to_string(x));
    return y;
}

Panel gauss_kronrod(const std::function<double(double)>& f, double a, double b)
{
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = checked(f, center);
    double kronrod = fc * kWk[7];
    double gauss = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kXk[j];
        const double f1 = checked(f, center - dx);
        const double f2 = checked(f, center + dx);
        kronrod += kWk[j] * (f1 + f2);
        if (j % 2 == 1)
            gauss += kWg[j / 2] * (f1 + f2);
    }
    Panel p{a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
    return p;
}

}  // namespace

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           const QuadratureOptions& opts)
{
    QuadratureResult result;
    if (a == b)
        return result;
    double sign = 1.0;
    if (b < a) {
        std::swap(a, b);
        sign = -1.0;
    }

    std::priority_queue<Panel> heap;
    Panel first = gauss_kronrod(f, a, b);
    double total = first.value;
    double error = first.error;
    heap.push(first);
    int count = 1;
    while (error > opts.abs_tol && count < opts.max_intervals) {
        Panel worst = heap.top();
        const double mid = 0.5 * (worst.a + worst.b);
        // Stop refining panels that can no longer be split in floating point.
        if (!(mid > worst.a && mid < worst.b))
            break;
        heap.pop();
        Panel left = gauss_kronrod(f, worst.a, mid);
        Panel right = gauss_kronrod(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++count;
    }
    // Re-sum to avoid drift from the running updates.
    total = 0.0;
    error = 0.0;
    while (!heap.empty()) {
        total += heap.top().value;
        error += heap.top().error;
        heap.pop();
    }
    result.value = sign * total;
    result.error = error;
    result.intervals = count;
    return result;
}

QuadratureResult integrate_with_breaks(const std::function<double(double)>& f, double a,
                                       double b, std::span<const double> breaks,
                                       const QuadratureOptions& opts)
{
    std::vector<double> cuts{a};
    for (double x : breaks)
        if (x > a && x < b)
            cuts.push_back(x);
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    QuadratureOptions sub = opts;
    sub.abs_tol = opts.abs_tol / static_cast<double>(cuts.size() - 1);
    QuadratureResult out;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        QuadratureResult piece = integrate(f, cuts[i], cuts[i + 1], sub);
        out.value += piece.value;
        out.error += piece.error;
        out.intervals += piece.intervals;
    }
    return out;
}

}  // namespace amplasso
