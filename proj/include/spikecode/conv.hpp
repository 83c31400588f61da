#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cassert>
#include <vector>

namespace spikecode {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// A batch of equally sized maps stored as channels x (count * height * width);
/// column (b * height + y) * width + x holds pixel (y, x) of item b.
struct BatchGeometry {
  Eigen::Index count = 0;
  Eigen::Index height = 0;
  Eigen::Index width = 0;

  Eigen::Index pixels() const { return count * height * width; }
  friend bool operator==(const BatchGeometry&, const BatchGeometry&) = default;
};

/// Zero-padded "same" patch matrix for a k x k kernel: row (dy * k + dx) * C + c
/// of column p holds channel c of the neighbour at offset (dy - k/2, dx - k/2).
template <typename Scalar>
void im2col(const Mat<Scalar>& in, const BatchGeometry& g, int k, Mat<Scalar>& cols) {
  const Eigen::Index channels = in.rows();
  assert(in.cols() == g.pixels());
  const int half = k / 2;
  cols.resize(channels * k * k, g.pixels());
  for (Eigen::Index b = 0; b < g.count; ++b) {
    for (Eigen::Index y = 0; y < g.height; ++y) {
      for (Eigen::Index x = 0; x < g.width; ++x) {
        const Eigen::Index p = (b * g.height + y) * g.width + x;
        Scalar* dst = cols.col(p).data();
        for (int dy = 0; dy < k; ++dy) {
          const Eigen::Index sy = y + dy - half;
          for (int dx = 0; dx < k; ++dx, dst += channels) {
            const Eigen::Index sx = x + dx - half;
            if (sy < 0 || sy >= g.height || sx < 0 || sx >= g.width) {
              std::fill(dst, dst + channels, Scalar(0));
              continue;
            }
            const Scalar* src = in.col((b * g.height + sy) * g.width + sx).data();
            std::copy(src, src + channels, dst);
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatters patch-matrix gradients back onto the maps.
template <typename Scalar>
void col2im_add(const Mat<Scalar>& cols, const BatchGeometry& g, int k, Mat<Scalar>& out) {
  const Eigen::Index channels = out.rows();
  assert(cols.rows() == channels * k * k && out.cols() == g.pixels());
  const int half = k / 2;
  for (Eigen::Index b = 0; b < g.count; ++b) {
    for (Eigen::Index y = 0; y < g.height; ++y) {
      for (Eigen::Index x = 0; x < g.width; ++x) {
        const Eigen::Index p = (b * g.height + y) * g.width + x;
        for (int dy = 0; dy < k; ++dy) {
          const Eigen::Index sy = y + dy - half;
          if (sy < 0 || sy >= g.height) continue;
          for (int dx = 0; dx < k; ++dx) {
            const Eigen::Index sx = x + dx - half;
            if (sx < 0 || sx >= g.width) continue;
            const Eigen::Index q = (b * g.height + sy) * g.width + sx;
            out.col(q) += cols.col(p).segment((dy * k + dx) * channels, channels);
          }
        }
      }
    }
  }
}

/// Active channels of a binary map, per pixel (compressed columns).
struct SpikeList {
  Eigen::Index channels = 0;
  std::vector<Eigen::Index> start;  // size pixels + 1
  std::vector<int> channel;

  template <typename Scalar>
  static SpikeList from(const Mat<Scalar>& spikes) {
    SpikeList s;
    s.channels = spikes.rows();
    s.start.resize(static_cast<std::size_t>(spikes.cols()) + 1);
    s.channel.resize(static_cast<std::size_t>(spikes.size()));
    std::size_t n = 0;
    s.start[0] = 0;
    for (Eigen::Index p = 0; p < spikes.cols(); ++p) {
      const Scalar* col = spikes.col(p).data();
      for (Eigen::Index c = 0; c < s.channels; ++c) {
        s.channel[n] = static_cast<int>(c);
        n += col[c] != Scalar(0);
      }
      s.start[static_cast<std::size_t>(p) + 1] = static_cast<Eigen::Index>(n);
    }
    s.channel.resize(n);
    s.channel.shrink_to_fit();
    return s;
  }
  Eigen::Index pixels() const { return static_cast<Eigen::Index>(start.size()) - 1; }
};

namespace detail {

/// Calls fn(p, j) for every output pixel p whose patch column has row j set
/// by a spike, i.e. every non-zero of im2col(spikes).
template <typename Fn>
void for_each_patch_entry(const SpikeList& s, const BatchGeometry& g, int k, Fn&& fn) {
  assert(s.pixels() == g.pixels());
  const int half = k / 2;
  const Eigen::Index C = s.channels;
  for (Eigen::Index b = 0; b < g.count; ++b) {
    for (Eigen::Index y = 0; y < g.height; ++y) {
      for (Eigen::Index x = 0; x < g.width; ++x) {
        const Eigen::Index q = (b * g.height + y) * g.width + x;
        const auto first = s.start[static_cast<std::size_t>(q)], last = s.start[static_cast<std::size_t>(q) + 1];
        if (first == last) continue;
        for (int dy = 0; dy < k; ++dy) {
          const Eigen::Index py = y - (dy - half);
          if (py < 0 || py >= g.height) continue;
          for (int dx = 0; dx < k; ++dx) {
            const Eigen::Index px = x - (dx - half);
            if (px < 0 || px >= g.width) continue;
            const Eigen::Index p = (b * g.height + py) * g.width + px;
            const Eigen::Index row = (dy * k + dx) * C;
            for (auto i = first; i < last; ++i) fn(p, row + s.channel[static_cast<std::size_t>(i)]);
          }
        }
      }
    }
  }
}

}  // namespace detail

/// out += weights * im2col(spikes) for a binary map, touching only the spikes.
template <typename Scalar>
void conv_spikes_add(const Mat<Scalar>& weights, const SpikeList& s, const BatchGeometry& g, int k, Mat<Scalar>& out) {
  assert(weights.cols() == s.channels * k * k && out.rows() == weights.rows() && out.cols() == g.pixels());
  const Eigen::Index n = out.rows();
  detail::for_each_patch_entry(s, g, k, [&](Eigen::Index p, Eigen::Index j) {
    Scalar* dst = out.col(p).data();
    const Scalar* src = weights.col(j).data();
    for (Eigen::Index o = 0; o < n; ++o) dst[o] += src[o];
  });
}

/// grad += d_out * im2col(spikes)^T for a binary map.
template <typename Scalar>
void conv_spikes_weight_grad(const Mat<Scalar>& d_out, const SpikeList& s, const BatchGeometry& g, int k,
                             Mat<Scalar>& grad) {
  assert(grad.cols() == s.channels * k * k && grad.rows() == d_out.rows() && d_out.cols() == g.pixels());
  const Eigen::Index n = grad.rows();
  detail::for_each_patch_entry(s, g, k, [&](Eigen::Index p, Eigen::Index j) {
    Scalar* dst = grad.col(j).data();
    const Scalar* src = d_out.col(p).data();
    for (Eigen::Index o = 0; o < n; ++o) dst[o] += src[o];
  });
}

}  // namespace spikecode
