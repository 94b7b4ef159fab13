// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace vidbossa {

/// Resolved worker count: explicit value, else VIDBOSSA_THREADS, else 1.
uint32_t resolve_threads(uint32_t requested);

/// Runs fn(i) for i in [0, n). Work items write to disjoint slots, so the
/// result is independent of the worker count. The first exception thrown by
/// any worker is rethrown on the calling thread.
void parallel_for(size_t n, uint32_t threads, const std::function<void(size_t)>& fn);

} // namespace vidbossa
