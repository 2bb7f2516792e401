#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmtssl/nn.hpp"
#include "cmtssl/tensor.hpp"

namespace cmtssl {

// Geometry of the shared encoder: a small U-Net-style 2D CNN over the band
// axis (bands as input channels). A 1x1 spectral projection keeps the
// parameter count tame for wide-band inputs; two pool/upsample stages with
// skip connections produce a full-resolution feature map of width `w0` plus
// a globally pooled feature vector.
struct EncoderSpec {
  int in_h = 16;
  int in_w = 16;
  int in_c = 0;   // must be set
  int w0 = 12;    // stem / decoder width and output feature depth
  int w1 = 16;    // bottleneck width
  std::size_t budget = 25000;  // total parameter budget (encoder + heads)
};

// Head geometry. Jigsaw heads are two-layer MLPs over the pooled feature
// emitting N^2 logits; the MIM head is a small conv decoder reconstructing
// the full cube; the optional segmentation head is a 3x3 conv to class
// logits.
struct HeadsSpec {
  int n_spa = 4;
  int n_spe = 4;
  int jigsaw_hidden = 32;
  int mim_hidden = 16;
  int seg_classes = 0;  // 0 = no segmentation head
};

enum class Component { encoder, head_spa, head_spe, head_mim, head_seg };

const char* component_name(Component c);

// Shared encoder + task heads over one ParamStore. All forward_* methods
// build onto a caller-provided tape so several task passes can share one
// backward; weight identity across heads holds because every pass binds the
// same parameter ids.
class MultiTaskModel {
 public:
  MultiTaskModel(EncoderSpec enc, HeadsSpec heads, std::uint64_t seed);

  const EncoderSpec& encoder_spec() const { return enc_; }
  const HeadsSpec& heads_spec() const { return heads_; }
  std::uint64_t seed() const { return seed_; }

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // Feature map {w0, H, W} for a normalized {H,W,C} cube.
  nn::Tape::Var encode(nn::Tape& tape, const Tensor& cube_hwc) const;

  nn::Tape::Var forward_spatial(nn::Tape& tape, const Tensor& cube_hwc) const;   // {n_spa^2}
  nn::Tape::Var forward_spectral(nn::Tape& tape, const Tensor& cube_hwc) const;  // {n_spe^2}
  nn::Tape::Var forward_mim(nn::Tape& tape, const Tensor& visible_hwc) const;    // {C,H,W}
  nn::Tape::Var forward_segmentation(nn::Tape& tape, const Tensor& cube_hwc) const;  // {nc,H,W}

  // Grad-free conveniences.
  std::vector<double> predict_spatial_logits(const Tensor& cube_hwc) const;
  std::vector<double> predict_spectral_logits(const Tensor& cube_hwc) const;
  Tensor predict_mim(const Tensor& visible_hwc) const;      // {H,W,C}
  Tensor predict_seg_logits(const Tensor& cube_hwc) const;  // {nc,H,W}
  std::vector<int> predict_labels(const Tensor& cube_hwc) const;  // argmax per pixel

  std::size_t parameter_count() const;
  std::size_t parameter_count(Component c) const;
  std::vector<int> component_param_ids(Component c) const;
  Component component_of(int param_id) const;

  // Overwrites encoder parameters (values only; fresh optimizer state).
  void copy_encoder_from(const MultiTaskModel& other);

  // Single-archive checkpoint: JSON header (specs, seed, schema version,
  // config snapshot) + raw little-endian float64 tensors keyed by name.
  void save_checkpoint(const std::string& path,
                       const std::string& config_snapshot_json = "{}") const;
  static MultiTaskModel load_checkpoint(const std::string& path,
                                        std::string* config_snapshot = nullptr);

 private:
  void check_input(const Tensor& cube_hwc) const;
  nn::Tape::Var jigsaw_head(nn::Tape& tape, nn::Tape::Var pooled, const char* prefix) const;
  nn::Tape::Var pv(nn::Tape& tape, const char* name) const;

  EncoderSpec enc_;
  HeadsSpec heads_;
  std::uint64_t seed_ = 0;
  nn::ParamStore params_;
};

}  // namespace cmtssl
