import { defineConfig } from 'vitest/config';

export default defineConfig({
  server: {
    // Dev proxy so the app and the API share an origin.
    proxy: {
      '/v1': 'http://127.0.0.1:8000',
    },
  },
  test: {
    environment: 'jsdom',
    include: ['tests/**/*.test.ts'],
  },
});
