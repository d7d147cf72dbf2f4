from mixmotion.cli import main

raise SystemExit(main())
