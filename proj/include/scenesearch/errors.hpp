#pragma once

#include <stdexcept>
#include <string>

namespace scenesearch {

/// Base for every fault raised by the library. `code()` is a stable,
/// machine-readable tag used by the env server error frames and CLI.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define SCENESEARCH_DEFINE_ERROR(Name, tag)                        \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what) : Error(tag, what) {}   \
  };

SCENESEARCH_DEFINE_ERROR(GenerationFailed, "generation_failed")
SCENESEARCH_DEFINE_ERROR(NoValidTask, "no_valid_task")
SCENESEARCH_DEFINE_ERROR(UnknownObjectId, "unknown_object_id")
SCENESEARCH_DEFINE_ERROR(UnknownNodeId, "unknown_node_id")
SCENESEARCH_DEFINE_ERROR(DisconnectedFreeSpace, "disconnected_free_space")
SCENESEARCH_DEFINE_ERROR(Unreachable, "unreachable")
SCENESEARCH_DEFINE_ERROR(InvalidParams, "invalid_params")
SCENESEARCH_DEFINE_ERROR(InvalidHouse, "invalid_house")
SCENESEARCH_DEFINE_ERROR(TeacherNotInCandidates, "teacher_not_in_candidates")
SCENESEARCH_DEFINE_ERROR(EmptyDataset, "empty_dataset")
SCENESEARCH_DEFINE_ERROR(EmptySet, "empty_set")
SCENESEARCH_DEFINE_ERROR(PlannerTransportError, "planner_transport_error")
SCENESEARCH_DEFINE_ERROR(SchemaMismatch, "schema_mismatch")
SCENESEARCH_DEFINE_ERROR(ConfigError, "config_error")

#undef SCENESEARCH_DEFINE_ERROR

}  // namespace scenesearch
