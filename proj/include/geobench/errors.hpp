#pragma once

#include <stdexcept>
#include <string>

namespace geobench {

// Base for every error the harness raises. Task-level failures (an agent
// calling a tool badly) are data and never surface as exceptions; these are
// reserved for malformed inputs, configuration mistakes and protocol
// violations.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define GEOBENCH_DEFINE_ERROR(Name)            \
    class Name : public Error {                \
    public:                                    \
        using Error::Error;                    \
    }

// trajectory model
GEOBENCH_DEFINE_ERROR(MalformedDocument);
GEOBENCH_DEFINE_ERROR(SchemaViolation);
GEOBENCH_DEFINE_ERROR(NonMonotoneSteps);

// tool registry
GEOBENCH_DEFINE_ERROR(DuplicateTool);
GEOBENCH_DEFINE_ERROR(UnknownTool);
GEOBENCH_DEFINE_ERROR(MissingParam);
GEOBENCH_DEFINE_ERROR(TypeMismatch);
GEOBENCH_DEFINE_ERROR(UnknownParam);
GEOBENCH_DEFINE_ERROR(EmptyRegistry);
GEOBENCH_DEFINE_ERROR(RegistryLoadError);

// sandbox
GEOBENCH_DEFINE_ERROR(MissingInputData);
GEOBENCH_DEFINE_ERROR(WorkspaceCollision);
GEOBENCH_DEFINE_ERROR(StepCapExceeded);
GEOBENCH_DEFINE_ERROR(PathEscapesWorkspace);

// metrics
GEOBENCH_DEFINE_ERROR(EmptyGold);

// judge
GEOBENCH_DEFINE_ERROR(UndecodableImage);
GEOBENCH_DEFINE_ERROR(BackendUnavailable);
GEOBENCH_DEFINE_ERROR(UnparseableScore);

// agents
GEOBENCH_DEFINE_ERROR(ModelProtocolViolation);
GEOBENCH_DEFINE_ERROR(MissingPlan);

// harness
GEOBENCH_DEFINE_ERROR(NoTasksFound);
GEOBENCH_DEFINE_ERROR(EmptyResults);

#undef GEOBENCH_DEFINE_ERROR

} // namespace geobench
