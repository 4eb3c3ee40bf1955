#pragma once

// Task type names and parameter records shared by the task bodies and the
// driver functions.

#include <memory>
#include <vector>

#include "quadtask/ops/ops.hpp"

namespace quadtask::ops_detail {

inline constexpr const char* kAdd = "matrix.add";
inline constexpr const char* kScale = "matrix.scale";
inline constexpr const char* kAssemble = "matrix.assemble";
inline constexpr const char* kAddIdentity = "matrix.add_identity";
inline constexpr const char* kMultiply = "matrix.multiply";
inline constexpr const char* kSymm = "matrix.symm";
inline constexpr const char* kSyrk = "matrix.syrk";
inline constexpr const char* kSysq = "matrix.sysq";
inline constexpr const char* kInvChol = "matrix.inv_chol";
inline constexpr const char* kNorms = "matrix.block_norms";
inline constexpr const char* kConcat = "matrix.concat_norms";
inline constexpr const char* kDrop = "matrix.drop_below";
inline constexpr const char* kBuild = "matrix.build";
inline constexpr const char* kExtract = "matrix.extract";

// consume_*: the operand is a temporary owned by this task and is released
// once read (unless it is passed through unchanged).
struct AddParams {
  double alpha = 1.0;
  double beta = 1.0;
  bool consume_a = false;
  bool consume_b = false;
};

struct ScaleParams {
  double alpha = 1.0;
  bool consume = false;
};

struct AssembleParams {
  int level = 0;
};

struct IdentityParams {
  double c = 0.0;
  MatrixParams params;
  int level = 0;
  Index offset = 0;  // first diagonal index covered by the node
};

struct MultiplyParams {
  Transpose ta = Transpose::no;
  Transpose tb = Transpose::no;
  bool approximate = false;
  double tau = 0.0;
  PruneLog* log = nullptr;
};

// Inputs are always (S, B); left computes S*B, right computes B*S.
struct SymmParams {
  bool left = true;
};

struct SyrkParams {
  Transpose trans = Transpose::no;
};

struct InvCholParams {
  MatrixParams params;
  int level = 0;
  Index offset = 0;
};

struct DropParams {
  double threshold = 0.0;
};

struct BuildParams {
  MatrixParams params;
  int level = 0;
  Index row0 = 0;
  Index col0 = 0;
  std::shared_ptr<const std::vector<Triplet>> entries;
};

struct ExtractParams {
  MatrixParams params;
  Index row0 = 0;
  Index col0 = 0;
  std::vector<std::size_t> which;
  std::shared_ptr<const std::vector<Coord>> coords;
  std::shared_ptr<std::vector<double>> out;
};

// Flat list of doubles; the first truncation pass gathers leaf unit norms
// in these.
class ValuesPayload final : public ChunkPayload {
 public:
  explicit ValuesPayload(std::vector<double> values) : values_(std::move(values)) {}

  const std::vector<double>& values() const { return values_; }
  std::size_t size_bytes() const override { return 8 + 8 * values_.size(); }
  void serialize(ByteWriter& out) const override;
  static std::shared_ptr<const ValuesPayload> decode(std::span<const std::byte> in);

 private:
  std::vector<double> values_;
};

void add_task_types(Runtime& rt);

}  // namespace quadtask::ops_detail
