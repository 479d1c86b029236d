import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // integration tests train throwaway checkpoints and spawn the service
    testTimeout: 180_000,
    hookTimeout: 300_000,
  },
});
