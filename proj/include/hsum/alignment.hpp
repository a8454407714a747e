#pragma once

#include <span>
#include <vector>

#include "hsum/autograd.hpp"
#include "hsum/dataset.hpp"

namespace hsum {

enum class Mode { child, parent };

// Token layout shared by the mask and the fused sequence:
//   0            [CLSV]
//   1 .. N       frame tokens
//   N + 1        [CLST]
//   N + 2 ..     text tokens (M subtitles in child mode, 1 description in
//                parent mode)
enum class Modality { cls_video, frame, cls_text, text };

struct TokenLayout {
  int n_frames = 0;
  int n_text = 0;

  int size() const { return n_frames + n_text + 2; }
  int cls_video() const { return 0; }
  int frame(int i) const { return 1 + i; }
  int cls_text() const { return n_frames + 1; }
  int text(int j) const { return n_frames + 2 + j; }
  Modality modality(int token) const;
  bool operator==(const TokenLayout& other) const = default;
};

// Additive large-negative logit used for blocked attention pairs.
inline constexpr double kMaskedLogit = -1e9;

struct MaskOptions {
  // When false, frame<->frame and text<->text attention is blocked (except
  // each token with itself); used by the cross-modal-only probe.
  bool intra_modal = true;
};

class AlignmentMask {
 public:
  AlignmentMask() = default;
  AlignmentMask(TokenLayout layout, std::vector<unsigned char> bits);

  int size() const { return layout_.size(); }
  const TokenLayout& layout() const { return layout_; }
  bool allowed(int query, int key) const {
    return bits_[static_cast<std::size_t>(query) * static_cast<std::size_t>(size()) +
                 static_cast<std::size_t>(key)] != 0;
  }
  // 0 where allowed, kMaskedLogit where blocked.
  Matrix additive() const;
  bool operator==(const AlignmentMask& other) const = default;

 private:
  TokenLayout layout_;
  std::vector<unsigned char> bits_;
};

// A frame i and subtitle j may attend to each other iff start_j <= i < end_j.
// Intra-modality blocks are open (unless disabled), [CLS] rows/columns are
// open everywhere.
AlignmentMask build_alignment_mask(int n_frames, int n_subtitles,
                                   std::span<const SubtitleSegment> subtitles,
                                   MaskOptions options = {});

// Learnable pieces of the input embedding. Position tables hold one row per
// slot; row 0 of `pos_video`/`pos_text` belongs to the [CLS] tokens.
struct EmbeddingParams {
  ad::Var video_proj_weight;  // D_v x D
  ad::Var video_proj_bias;    // 1 x D
  ad::Var text_proj_weight;   // D_t x D
  ad::Var text_proj_bias;     // 1 x D
  ad::Var cls_video;          // 1 x D
  ad::Var cls_text;           // 1 x D
  ad::Var pos_video;          // (max_N + 1) x D
  ad::Var pos_text;           // (max_M + 1) x D
  ad::Var seg_start;          // max_N x D, indexed by a segment's first frame
  ad::Var seg_end;            // max_N x D, indexed by a segment's last frame
};

struct FusedSequence {
  ad::Var tokens;  // (2 + N + M') x D
  TokenLayout layout;
  std::vector<Modality> modality;
  // Segment id per token: subtitle index for text tokens and for frames they
  // cover (first covering subtitle), -1 otherwise.
  std::vector<int> segment;
  AlignmentMask mask;
  std::vector<SubtitleSegment> segments;  // text-side spans actually used
};

// Child mode uses the M subtitles; parent mode replaces them with the single
// description feature spanning [0, N).
FusedSequence build_fused_sequence(const VideoSample& sample, const EmbeddingParams& params,
                                   Mode mode, MaskOptions mask_options = {});

// Text-side spans for a mode (one full-length span in parent mode).
std::vector<SubtitleSegment> text_segments(const VideoSample& sample, Mode mode);

}  // namespace hsum
